//! Network data model for hybrid AC/DC grids.
//!
//! All quantities are per unit on a single system base power. AC voltages are
//! phase-to-ground; every power (per phase or three-phase total) is divided by
//! the same base, so phase powers add up to the three-phase value.

pub mod admittance;
pub mod sequence;
pub mod topology;

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::converter::LossParams;
pub use admittance::{build_ac_admittance, build_dc_admittance, AcAdmittance, CompoundAdmittance, DcAdmittance};
pub use sequence::{phase_to_sequence, sequence_to_phase, PhaseMatrix, PhaseVector, Sequence, SequenceSet};
pub use topology::{validate_topology, Diagnostic, DiagnosticKind};

pub type BusId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AcBusKind {
    /// Balanced voltage source fixing `|E|` and the phase-a angle (rad).
    Slack { v_mag: f64, angle: f64 },
    /// Per-phase active and reactive injections.
    Pq { p: [f64; 3], q: [f64; 3] },
    /// Per-phase active injection and a common voltage magnitude.
    Pv { p: [f64; 3], v_mag: f64 },
    /// AC terminal of an interfacing converter; setpoints live on the converter.
    ConverterAc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcBus {
    pub id: BusId,
    pub kind: AcBusKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DcBusKind {
    P { p: f64 },
    V { v: f64 },
    ConverterDc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcBus {
    pub id: BusId,
    pub kind: DcBusKind,
}

/// Three-phase pi-section. `shunt` is the total shunt admittance, split half per end.
#[derive(Debug, Clone, PartialEq)]
pub struct AcBranch {
    pub from: BusId,
    pub to: BusId,
    pub series: PhaseMatrix,
    pub shunt: PhaseMatrix,
}

impl AcBranch {
    /// Uncoupled branch with identical impedance on every phase and no shunt.
    pub fn uncoupled(from: BusId, to: BusId, z: Complex64) -> Self {
        Self {
            from,
            to,
            series: PhaseMatrix::from_diagonal_element(z),
            shunt: PhaseMatrix::zeros(),
        }
    }

    /// Symmetric coupled branch: self impedance `z_self`, mutual `z_mutual`.
    pub fn coupled(from: BusId, to: BusId, z_self: Complex64, z_mutual: Complex64) -> Self {
        let mut series = PhaseMatrix::from_element(z_mutual);
        series.fill_diagonal(z_self);
        Self { from, to, series, shunt: PhaseMatrix::zeros() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcBranch {
    pub from: BusId,
    pub to: BusId,
    pub resistance: f64,
}

/// Converter control mode with its setpoints.
///
/// Converter powers are positive when flowing from the AC grid into the DC
/// grid; reactive power is positive when drawn from the AC grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ConverterMode {
    EdcQac { e_dc: f64, q_ac: f64 },
    PacQac { p_pos: f64, q_pos: f64, p_neg: f64, q_neg: f64 },
    PacVac { p_pos: f64, v_ac: f64 },
}

impl ConverterMode {
    pub fn name(&self) -> &'static str {
        match self {
            ConverterMode::EdcQac { .. } => "edc_qac",
            ConverterMode::PacQac { .. } => "pac_qac",
            ConverterMode::PacVac { .. } => "pac_vac",
        }
    }

    pub fn controls_dc_voltage(&self) -> bool {
        matches!(self, ConverterMode::EdcQac { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SequencePolicy {
    #[default]
    PositiveOnly,
    WithNegative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Converter {
    pub id: BusId,
    pub ac_bus: BusId,
    pub dc_bus: BusId,
    pub mode: ConverterMode,
    pub sequence: SequencePolicy,
    pub losses: LossParams,
    pub z_filter: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseValues {
    /// Three-phase base power (VA).
    pub s_base: f64,
    /// AC line-to-line base voltage (V).
    pub v_base_ac: f64,
    /// DC base voltage (V).
    pub v_base_dc: f64,
    /// Line frequency (Hz).
    pub f_line: f64,
}

impl BaseValues {
    /// Phase-to-ground AC base voltage.
    pub fn v_phase_ac(&self) -> f64 {
        self.v_base_ac / 3f64.sqrt()
    }

    pub fn z_base_ac(&self) -> f64 {
        self.v_phase_ac().powi(2) / self.s_base
    }

    pub fn z_base_dc(&self) -> f64 {
        self.v_base_dc.powi(2) / self.s_base
    }
}

impl Default for BaseValues {
    fn default() -> Self {
        Self {
            s_base: 100e3,
            v_base_ac: 400.0,
            v_base_dc: 800.0,
            f_line: 50.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("duplicate {what} id {id}")]
    DuplicateId { what: &'static str, id: BusId },
    #[error("{what} references unknown {target} bus {id}")]
    UnknownBus { what: String, target: &'static str, id: BusId },
    #[error("invalid data in {what}: {reason}")]
    InvalidData { what: String, reason: String },
    #[error("series impedance of AC branch {from}-{to} is singular")]
    SingularImpedance { from: BusId, to: BusId },
}

fn invalid(what: impl Into<String>, reason: impl Into<String>) -> CaseError {
    CaseError::InvalidData { what: what.into(), reason: reason.into() }
}

/// Raw description of a network; turned into a [`NetworkCase`] by validation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseData {
    pub name: String,
    pub base: BaseValues,
    pub ac_buses: Vec<AcBus>,
    pub dc_buses: Vec<DcBus>,
    pub ac_branches: Vec<AcBranch>,
    pub dc_branches: Vec<DcBranch>,
    pub converters: Vec<Converter>,
}

/// A validated hybrid AC/DC network. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    data: CaseData,
    ac_index: HashMap<BusId, usize>,
    dc_index: HashMap<BusId, usize>,
    conv_of_ac: HashMap<usize, usize>,
    conv_of_dc: HashMap<usize, usize>,
}

impl std::ops::Deref for NetworkCase {
    type Target = CaseData;

    fn deref(&self) -> &CaseData {
        &self.data
    }
}

impl NetworkCase {
    /// Checks ids, references and per-element data. Topology rules (slack per
    /// island, DC voltage sources) are reported by [`validate_topology`].
    pub fn new(data: CaseData) -> Result<Self, CaseError> {
        let mut ac_index = HashMap::new();
        for (k, b) in data.ac_buses.iter().enumerate() {
            if ac_index.insert(b.id, k).is_some() {
                return Err(CaseError::DuplicateId { what: "AC bus", id: b.id });
            }
            match &b.kind {
                AcBusKind::Slack { v_mag, angle } => {
                    if !(*v_mag > 0.0) || !angle.is_finite() {
                        return Err(invalid(format!("AC bus {}", b.id), "slack needs |E| > 0 and a finite angle"));
                    }
                }
                AcBusKind::Pv { p, v_mag } => {
                    if !(*v_mag > 0.0) || p.iter().any(|v| !v.is_finite()) {
                        return Err(invalid(format!("AC bus {}", b.id), "PV bus needs finite P and |E| > 0"));
                    }
                }
                AcBusKind::Pq { p, q } => {
                    if p.iter().chain(q).any(|v| !v.is_finite()) {
                        return Err(invalid(format!("AC bus {}", b.id), "non-finite setpoint"));
                    }
                }
                AcBusKind::ConverterAc => {}
            }
        }
        let mut dc_index = HashMap::new();
        for (k, b) in data.dc_buses.iter().enumerate() {
            if dc_index.insert(b.id, k).is_some() {
                return Err(CaseError::DuplicateId { what: "DC bus", id: b.id });
            }
            match b.kind {
                DcBusKind::V { v } if !(v > 0.0) => {
                    return Err(invalid(format!("DC bus {}", b.id), format!("voltage setpoint must be positive, got {v}")));
                }
                DcBusKind::P { p } if !p.is_finite() => {
                    return Err(invalid(format!("DC bus {}", b.id), "non-finite power setpoint"));
                }
                _ => {}
            }
        }
        for br in &data.ac_branches {
            for id in [br.from, br.to] {
                if !ac_index.contains_key(&id) {
                    return Err(CaseError::UnknownBus {
                        what: format!("AC branch {}-{}", br.from, br.to),
                        target: "AC",
                        id,
                    });
                }
            }
            if br.from == br.to {
                return Err(invalid(format!("AC branch {}-{}", br.from, br.to), "branch connects a bus to itself"));
            }
            let asym = (br.series - br.series.transpose()).norm() + (br.shunt - br.shunt.transpose()).norm();
            if asym > 1e-12 * (1.0 + br.series.norm()) {
                return Err(invalid(format!("AC branch {}-{}", br.from, br.to), "impedance matrices must be symmetric"));
            }
        }
        for br in &data.dc_branches {
            for id in [br.from, br.to] {
                if !dc_index.contains_key(&id) {
                    return Err(CaseError::UnknownBus {
                        what: format!("DC branch {}-{}", br.from, br.to),
                        target: "DC",
                        id,
                    });
                }
            }
            if !(br.resistance > 0.0) {
                return Err(invalid(
                    format!("DC branch {}-{}", br.from, br.to),
                    format!("resistance must be positive, got {}", br.resistance),
                ));
            }
            if br.from == br.to {
                return Err(invalid(format!("DC branch {}-{}", br.from, br.to), "branch connects a bus to itself"));
            }
        }
        let mut conv_ids = HashMap::new();
        let mut conv_of_ac = HashMap::new();
        let mut conv_of_dc = HashMap::new();
        for (k, c) in data.converters.iter().enumerate() {
            if conv_ids.insert(c.id, k).is_some() {
                return Err(CaseError::DuplicateId { what: "converter", id: c.id });
            }
            let what = format!("converter {}", c.id);
            let ac = *ac_index.get(&c.ac_bus).ok_or(CaseError::UnknownBus { what: what.clone(), target: "AC", id: c.ac_bus })?;
            let dc = *dc_index.get(&c.dc_bus).ok_or(CaseError::UnknownBus { what: what.clone(), target: "DC", id: c.dc_bus })?;
            if conv_of_ac.insert(ac, k).is_some() {
                return Err(invalid(what, format!("AC bus {} already hosts a converter", c.ac_bus)));
            }
            if conv_of_dc.insert(dc, k).is_some() {
                return Err(invalid(what, format!("DC bus {} already hosts a converter", c.dc_bus)));
            }
            if c.sequence == SequencePolicy::WithNegative && !matches!(c.mode, ConverterMode::PacQac { .. }) {
                return Err(invalid(what, "negative-sequence injection is only available in pac_qac mode"));
            }
            match c.mode {
                ConverterMode::EdcQac { e_dc, .. } if !(e_dc > 0.0) => {
                    return Err(invalid(what, "DC voltage setpoint must be positive"));
                }
                ConverterMode::PacVac { v_ac, .. } if !(v_ac > 0.0) => {
                    return Err(invalid(what, "AC voltage setpoint must be positive"));
                }
                _ => {}
            }
            if !(c.z_filter.re >= 0.0) {
                return Err(invalid(what, "filter resistance must be non-negative"));
            }
        }
        Ok(Self { data, ac_index, dc_index, conv_of_ac, conv_of_dc })
    }

    pub fn data(&self) -> &CaseData {
        &self.data
    }

    pub fn into_data(self) -> CaseData {
        self.data
    }

    pub fn ac_index(&self, id: BusId) -> Option<usize> {
        self.ac_index.get(&id).copied()
    }

    pub fn dc_index(&self, id: BusId) -> Option<usize> {
        self.dc_index.get(&id).copied()
    }

    /// Converter attached to the AC bus at position `ac`.
    pub fn converter_at_ac(&self, ac: usize) -> Option<usize> {
        self.conv_of_ac.get(&ac).copied()
    }

    pub fn converter_at_dc(&self, dc: usize) -> Option<usize> {
        self.conv_of_dc.get(&dc).copied()
    }

    /// Positions of the (AC, DC) buses of converter `k`.
    pub fn converter_buses(&self, k: usize) -> (usize, usize) {
        let c = &self.data.converters[k];
        (self.ac_index[&c.ac_bus], self.dc_index[&c.dc_bus])
    }
}
