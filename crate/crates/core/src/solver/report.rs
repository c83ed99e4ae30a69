//! Post-processed quantities of a solved operating point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::admittance::series_admittance;
use crate::grid::{phase_to_sequence, AcBusKind, BusId, PhaseVector};
use crate::residuals::{Model, OperatingPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcBusVoltage {
    pub id: BusId,
    pub phases: [Complex64; 3],
    /// Zero, positive and negative sequence.
    pub sequences: [Complex64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcBusVoltage {
    pub id: BusId,
    pub voltage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackInjection {
    pub id: BusId,
    /// Complex power injected into the network per phase.
    pub power: [Complex64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcBranchFlow {
    pub from: BusId,
    pub to: BusId,
    pub s_from: [Complex64; 3],
    pub s_to: [Complex64; 3],
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcBranchFlow {
    pub from: BusId,
    pub to: BusId,
    pub p_from: f64,
    pub p_to: f64,
    pub loss: f64,
}

/// Converter quantities; powers are positive from AC to DC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterReport {
    pub id: BusId,
    pub mode: String,
    pub ac_bus: BusId,
    pub dc_bus: BusId,
    pub e_dc: f64,
    /// Zero, positive and negative sequence terminal voltage.
    pub e_seq: [Complex64; 3],
    /// Sequence currents injected into the AC grid.
    pub i_seq: [Complex64; 3],
    pub s_pos: Complex64,
    pub s_neg: Complex64,
    pub p_ac: f64,
    pub q_ac: f64,
    pub p_dc: f64,
    /// Conduction plus switching losses.
    pub loss: f64,
    pub filter_loss: f64,
    /// `p_ac − p_dc − loss − filter_loss`.
    pub balance_error: f64,
}

pub(crate) fn voltages(model: &Model<'_>, op: &OperatingPoint) -> (Vec<AcBusVoltage>, Vec<DcBusVoltage>) {
    let case = model.case();
    let ac = case
        .ac_buses
        .iter()
        .zip(&op.ac_voltage)
        .map(|(b, e)| {
            let seq = phase_to_sequence(e);
            AcBusVoltage { id: b.id, phases: to_array(e), sequences: [seq.zero, seq.positive, seq.negative] }
        })
        .collect();
    let dc = case
        .dc_buses
        .iter()
        .zip(&op.dc_voltage)
        .map(|(b, v)| DcBusVoltage { id: b.id, voltage: *v })
        .collect();
    (ac, dc)
}

fn to_array(v: &PhaseVector) -> [Complex64; 3] {
    [v[0], v[1], v[2]]
}

pub(crate) fn slack_injections(model: &Model<'_>, op: &OperatingPoint) -> Vec<SlackInjection> {
    model
        .case()
        .ac_buses
        .iter()
        .enumerate()
        .filter(|(_, b)| matches!(b.kind, AcBusKind::Slack { .. }))
        .map(|(i, b)| SlackInjection {
            id: b.id,
            power: std::array::from_fn(|p| op.ac_voltage[i][p] * op.ac_current[i][p].conj()),
        })
        .collect()
}

pub(crate) fn branch_flows(model: &Model<'_>, op: &OperatingPoint) -> (Vec<AcBranchFlow>, Vec<DcBranchFlow>) {
    let case = model.case();
    let ac = case
        .ac_branches
        .iter()
        .map(|br| {
            let (f, t) = (case.ac_index(br.from).unwrap(), case.ac_index(br.to).unwrap());
            let ys = series_admittance(br).expect("admittance was built for this case");
            let half = br.shunt * Complex64::new(0.5, 0.0);
            let (ef, et) = (op.ac_voltage[f], op.ac_voltage[t]);
            let i_from = ys * (ef - et) + half * ef;
            let i_to = ys * (et - ef) + half * et;
            let s_from: [Complex64; 3] = std::array::from_fn(|p| ef[p] * i_from[p].conj());
            let s_to: [Complex64; 3] = std::array::from_fn(|p| et[p] * i_to[p].conj());
            let loss = (0..3).map(|p| s_from[p].re + s_to[p].re).sum();
            AcBranchFlow { from: br.from, to: br.to, s_from, s_to, loss }
        })
        .collect();
    let dc = case
        .dc_branches
        .iter()
        .map(|br| {
            let (f, t) = (case.dc_index(br.from).unwrap(), case.dc_index(br.to).unwrap());
            let (ef, et) = (op.dc_voltage[f], op.dc_voltage[t]);
            let i = (ef - et) / br.resistance;
            DcBranchFlow { from: br.from, to: br.to, p_from: ef * i, p_to: -et * i, loss: ef * i - et * i }
        })
        .collect();
    (ac, dc)
}

pub(crate) fn converters(model: &Model<'_>, op: &OperatingPoint) -> Vec<ConverterReport> {
    let case = model.case();
    case.converters
        .iter()
        .zip(&op.converters)
        .enumerate()
        .map(|(k, (conv, t))| {
            let (_, d) = case.converter_buses(k);
            let loss = t.loss_pos.s_loss.re + t.loss_neg.s_loss.re;
            let filter_loss = t.loss_pos.p_filter + t.loss_neg.p_filter;
            ConverterReport {
                id: conv.id,
                mode: conv.mode.name().to_string(),
                ac_bus: conv.ac_bus,
                dc_bus: conv.dc_bus,
                e_dc: op.dc_voltage[d],
                e_seq: [t.e_seq.zero, t.e_seq.positive, t.e_seq.negative],
                i_seq: [t.i_seq.zero, t.i_seq.positive, t.i_seq.negative],
                s_pos: t.s_pos,
                s_neg: t.s_neg,
                p_ac: t.p_ac(),
                q_ac: t.q_ac(),
                p_dc: t.p_dc,
                loss,
                filter_loss,
                balance_error: t.p_ac() - t.p_dc - loss - filter_loss,
            }
        })
        .collect()
}
