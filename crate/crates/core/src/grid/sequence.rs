//! Symmetrical components.
//!
//! Phase quantities `(a, b, c)` map to zero, positive and negative sequence
//! phasors through the Fortescue operator `α = exp(j2π/3)`:
//!
//! ```text
//! [E0]         [1  1   1 ] [Ea]
//! [E+] = 1/3 · [1  α   α²] [Eb]
//! [E-]         [1  α²  α ] [Ec]
//! ```
//!
//! With this scaling the three-phase complex power of a set is
//! `Σφ Eφ·conj(Iφ) = 3·(E0·conj(I0) + E+·conj(I+) + E-·conj(I-))`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Three phase phasors ordered `a, b, c`.
pub type PhaseVector = Vector3<Complex64>;
/// A 3×3 complex matrix over phases.
pub type PhaseMatrix = Matrix3<Complex64>;

/// `α = exp(j2π/3)`.
pub fn alpha() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// Sequence index within a [`SequenceSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    Zero,
    Positive,
    Negative,
}

impl Sequence {
    pub const ALL: [Sequence; 3] = [Sequence::Zero, Sequence::Positive, Sequence::Negative];

    pub fn index(self) -> usize {
        match self {
            Sequence::Zero => 0,
            Sequence::Positive => 1,
            Sequence::Negative => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceSet {
    pub zero: Complex64,
    pub positive: Complex64,
    pub negative: Complex64,
}

impl SequenceSet {
    pub fn new(zero: Complex64, positive: Complex64, negative: Complex64) -> Self {
        Self { zero, positive, negative }
    }

    pub fn get(&self, seq: Sequence) -> Complex64 {
        match seq {
            Sequence::Zero => self.zero,
            Sequence::Positive => self.positive,
            Sequence::Negative => self.negative,
        }
    }
}

/// Row `s` of the forward transform: `E_s = Σφ forward[s][φ]·Eφ`.
pub fn forward_matrix() -> PhaseMatrix {
    let a = alpha();
    let a2 = a * a;
    let one = Complex64::new(1.0, 0.0);
    PhaseMatrix::new(one, one, one, one, a, a2, one, a2, a) / Complex64::new(3.0, 0.0)
}

/// Column `s` is the phase pattern of a unit sequence-`s` phasor.
pub fn inverse_matrix() -> PhaseMatrix {
    let a = alpha();
    let a2 = a * a;
    let one = Complex64::new(1.0, 0.0);
    PhaseMatrix::new(one, one, one, one, a2, a, one, a, a2)
}

pub fn phase_to_sequence(abc: &PhaseVector) -> SequenceSet {
    let s = forward_matrix() * abc;
    SequenceSet::new(s[0], s[1], s[2])
}

pub fn sequence_to_phase(seq: &SequenceSet) -> PhaseVector {
    inverse_matrix() * Vector3::new(seq.zero, seq.positive, seq.negative)
}

/// Balanced positive-sequence phase set with magnitude `mag` and phase-a angle `angle`.
pub fn balanced_set(mag: f64, angle: f64) -> PhaseVector {
    sequence_to_phase(&SequenceSet::new(
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(mag, angle),
        Complex64::new(0.0, 0.0),
    ))
}
