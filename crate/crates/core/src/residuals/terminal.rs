//! Electrical quantities at an interfacing converter's terminals.

use num_complex::Complex64;

use crate::converter::{conduction_voltage, converter_losses, filter_losses, LossBreakdown};
use crate::grid::{phase_to_sequence, Converter, PhaseVector, SequencePolicy, SequenceSet};

/// Converter operating quantities derived from the network voltages.
///
/// Powers follow the converter convention: positive when flowing from the AC
/// grid into the converter (`s_pos`, `s_neg`) and from the converter into the
/// DC grid (`p_dc`). Loss entries are three-phase totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterTerminal {
    pub e_seq: SequenceSet,
    /// Sequence components of the current injected into the AC grid.
    pub i_seq: SequenceSet,
    pub s_pos: Complex64,
    pub s_neg: Complex64,
    pub loss_pos: LossBreakdown,
    pub loss_neg: LossBreakdown,
    pub p_dc: f64,
}

impl ConverterTerminal {
    pub fn new(conv: &Converter, e_ac: &PhaseVector, i_ac: &PhaseVector, e_dc: f64, i_dc: f64) -> Self {
        let e_seq = phase_to_sequence(e_ac);
        let i_seq = phase_to_sequence(i_ac);
        let s_pos = -3.0 * e_seq.positive * i_seq.positive.conj();
        let s_neg = -3.0 * e_seq.negative * i_seq.negative.conj();

        let leg = converter_losses(i_seq.positive, e_dc, &conv.losses);
        let loss_pos = LossBreakdown {
            s_loss: 3.0 * leg.s_loss,
            p_filter: 3.0 * filter_losses(i_seq.positive, conv.z_filter),
            e_c: leg.e_c,
            i_sw: 3.0 * leg.i_sw,
        };
        let loss_neg = match conv.sequence {
            SequencePolicy::WithNegative => {
                let e_c = conduction_voltage(i_seq.negative, &conv.losses);
                LossBreakdown {
                    s_loss: 3.0 * e_c * i_seq.negative.conj(),
                    p_filter: 3.0 * filter_losses(i_seq.negative, conv.z_filter),
                    e_c,
                    i_sw: 0.0,
                }
            }
            SequencePolicy::PositiveOnly => LossBreakdown::default(),
        };
        Self {
            e_seq,
            i_seq,
            s_pos,
            s_neg,
            loss_pos,
            loss_neg,
            p_dc: e_dc * i_dc,
        }
    }

    /// Conduction, switching and filter losses of all sequences.
    pub fn p_loss_total(&self) -> f64 {
        self.loss_pos.p_total() + self.loss_neg.p_total()
    }

    /// Power drawn from the AC grid (positive plus negative sequence).
    pub fn p_ac(&self) -> f64 {
        self.s_pos.re + self.s_neg.re
    }

    pub fn q_ac(&self) -> f64 {
        self.s_pos.im + self.s_neg.im
    }

    /// Three-phase totals of the loss quantities.
    pub fn loss_total(&self) -> LossBreakdown {
        LossBreakdown {
            s_loss: self.loss_pos.s_loss + self.loss_neg.s_loss,
            p_filter: self.loss_pos.p_filter + self.loss_neg.p_filter,
            e_c: self.loss_pos.e_c,
            i_sw: self.loss_pos.i_sw,
        }
    }
}
