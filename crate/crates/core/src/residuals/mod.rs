//! Power-flow mismatch equations.
//!
//! The unknowns are the rectangular phase voltages `E'`, `E''` of every
//! non-slack AC bus and the voltage of every DC bus. Each unknown is paired
//! with one scalar equation, so the system is square:
//!
//! | bus                     | equations                                       |
//! |-------------------------|-------------------------------------------------|
//! | PQ                      | P and Q per phase                               |
//! | PV                      | P and `|E|²` per phase                          |
//! | converter AC, any mode  | `E0' = E0'' = 0` plus four mode rows            |
//! | converter DC, `edc_qac` | `E = E*`                                        |
//! | converter DC, otherwise | DC power balance                                |
//! | DC P / V                | `E·(Y·E) = P*` / `E = E*`                        |
//!
//! The four mode rows of a converter AC bus are the positive-sequence power
//! balance, the positive-sequence reactive (or magnitude for `pac_vac`) row,
//! and either `E-' = E-'' = 0` or, with negative-sequence injection, the
//! negative-sequence P and Q rows.
//!
//! Rows are ordered in blocks `P_ac, Q_ac | E_dc | P+, Q+ | E0', E-', E0'',
//! E-'' | P_dc`; columns as `E' | E'' | E_dc`.

mod dc_root;
mod terminal;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::admittance::AdmittanceError;
use crate::grid::sequence::{balanced_set, forward_matrix, inverse_matrix};
use crate::grid::{
    validate_topology, AcBusKind, CompoundAdmittance, ConverterMode, DcBusKind, Diagnostic, NetworkCase, Phase,
    PhaseMatrix, PhaseVector, SequencePolicy,
};
pub use dc_root::{dc_roots, feasible_root, DcRootError};
pub use terminal::ConverterTerminal;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("topology check failed: {}", .0.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; "))]
    Topology(Vec<Diagnostic>),
    #[error(transparent)]
    Admittance(#[from] AdmittanceError),
    #[error("state vector has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Maps unknowns to positions in the state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    ac_slot: Vec<Option<usize>>,
    n_ac_slots: usize,
    n_dc: usize,
}

impl StateLayout {
    pub fn new(case: &NetworkCase) -> Self {
        let mut next = 0;
        let ac_slot = case
            .ac_buses
            .iter()
            .map(|b| match b.kind {
                AcBusKind::Slack { .. } => None,
                _ => {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        Self { ac_slot, n_ac_slots: next, n_dc: case.dc_buses.len() }
    }

    pub fn len(&self) -> usize {
        6 * self.n_ac_slots + self.n_dc
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column of `E'` for (AC bus position, phase), `None` for slack buses.
    pub fn re_col(&self, bus: usize, phase: usize) -> Option<usize> {
        self.ac_slot[bus].map(|s| 3 * s + phase)
    }

    pub fn im_col(&self, bus: usize, phase: usize) -> Option<usize> {
        self.ac_slot[bus].map(|s| 3 * self.n_ac_slots + 3 * s + phase)
    }

    pub fn dc_col(&self, bus: usize) -> usize {
        6 * self.n_ac_slots + bus
    }

    pub fn n_ac_unknown_buses(&self) -> usize {
        self.n_ac_slots
    }
}

/// Newton-Raphson unknowns, laid out by a [`StateLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationKind {
    ActivePower,
    ReactivePower,
    VoltageMagnitude,
    DcVoltage,
    PositiveActive,
    PositiveReactive,
    PositiveMagnitude,
    ZeroSequenceRe,
    NegativeSequenceRe,
    NegativeActive,
    ZeroSequenceIm,
    NegativeSequenceIm,
    NegativeReactive,
    NegativeCurrentRe,
    NegativeCurrentIm,
    DcPower,
    ConverterDcPower,
}

impl EquationKind {
    fn tag(self) -> &'static str {
        match self {
            EquationKind::ActivePower => "P_ac",
            EquationKind::ReactivePower => "Q_ac",
            EquationKind::VoltageMagnitude => "|E_ac|",
            EquationKind::DcVoltage => "E_dc",
            EquationKind::PositiveActive => "P+",
            EquationKind::PositiveReactive => "Q+",
            EquationKind::PositiveMagnitude => "|E+|",
            EquationKind::ZeroSequenceRe => "E0'",
            EquationKind::NegativeSequenceRe => "E-'",
            EquationKind::NegativeActive => "P-",
            EquationKind::ZeroSequenceIm => "E0''",
            EquationKind::NegativeSequenceIm => "E-''",
            EquationKind::NegativeReactive => "Q-",
            EquationKind::NegativeCurrentRe => "I-'",
            EquationKind::NegativeCurrentIm => "I-''",
            EquationKind::DcPower => "P_dc",
            EquationKind::ConverterDcPower => "P_dc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    AcPhase { bus: usize, phase: usize },
    Dc { bus: usize },
    Converter { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Equation {
    pub kind: EquationKind,
    pub site: Site,
}

/// Mismatch `y* − F(x)` with one label per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub values: Vec<f64>,
    pub labels: Arc<Vec<String>>,
}

impl ResidualVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Infinity norm and the row attaining it.
    pub fn max_abs(&self) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (k, v) in self.values.iter().enumerate() {
            if v.is_nan() {
                return (f64::NAN, Some(k));
            }
            if v.abs() > best.0 || best.1.is_none() {
                best = (v.abs(), Some(k));
            }
        }
        best
    }

    pub fn norm_inf(&self) -> f64 {
        self.max_abs().0
    }
}

/// Voltages, injected currents and converter quantities at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub ac_voltage: Vec<PhaseVector>,
    pub ac_current: Vec<PhaseVector>,
    pub dc_voltage: Vec<f64>,
    pub dc_current: Vec<f64>,
    pub converters: Vec<ConverterTerminal>,
}

/// Six AC-side and one DC-side residual of an interfacing converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterResiduals {
    pub ac: [(EquationKind, f64); 6],
    pub dc: (EquationKind, f64),
}

/// A validated case prepared for residual evaluation.
#[derive(Debug, Clone)]
pub struct Model<'a> {
    case: &'a NetworkCase,
    admittance: CompoundAdmittance,
    layout: StateLayout,
    slack: Vec<Option<PhaseVector>>,
    equations: Vec<Equation>,
    targets: Vec<f64>,
    labels: Arc<Vec<String>>,
    warm_up: bool,
}

impl<'a> Model<'a> {
    pub fn new(case: &'a NetworkCase) -> Result<Self, ModelError> {
        Self::build(case, false)
    }

    /// Variant used to start converters with negative-sequence injection:
    /// their negative-sequence power rows are replaced by `I- = 0`, which
    /// places the start on the low-current solution branch.
    pub fn negative_sequence_warm_up(case: &'a NetworkCase) -> Result<Self, ModelError> {
        Self::build(case, true)
    }

    pub fn is_warm_up(&self) -> bool {
        self.warm_up
    }

    fn build(case: &'a NetworkCase, warm_up: bool) -> Result<Self, ModelError> {
        let diagnostics = validate_topology(case);
        if !diagnostics.is_empty() {
            return Err(ModelError::Topology(diagnostics));
        }
        let admittance = CompoundAdmittance::build(case)?;
        let layout = StateLayout::new(case);
        let slack = case
            .ac_buses
            .iter()
            .map(|b| match b.kind {
                AcBusKind::Slack { v_mag, angle } => Some(balanced_set(v_mag, angle)),
                _ => None,
            })
            .collect();
        let equations = equation_order(case, warm_up);
        debug_assert_eq!(equations.len(), layout.len());
        let targets = equations.iter().map(|eq| target(case, eq, warm_up)).collect();
        let labels = Arc::new(equations.iter().map(|eq| label(case, eq)).collect());
        Ok(Self { case, admittance, layout, slack, equations, targets, labels, warm_up })
    }

    pub fn case(&self) -> &'a NetworkCase {
        self.case
    }

    pub fn admittance(&self) -> &CompoundAdmittance {
        &self.admittance
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    /// Setpoint vector `y*`.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn labels(&self) -> &Arc<Vec<String>> {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    /// Fixed voltage of a slack bus.
    pub fn slack_voltage(&self, bus: usize) -> Option<PhaseVector> {
        self.slack[bus]
    }

    /// Full AC and DC voltage profiles from a state vector.
    pub fn voltages(&self, x: &StateVector) -> (Vec<PhaseVector>, Vec<f64>) {
        let ac = (0..self.case.ac_buses.len())
            .map(|i| match self.slack[i] {
                Some(v) => v,
                None => PhaseVector::from_fn(|p, _| {
                    Complex64::new(
                        x.values[self.layout.re_col(i, p).unwrap()],
                        x.values[self.layout.im_col(i, p).unwrap()],
                    )
                }),
            })
            .collect();
        let dc = (0..self.case.dc_buses.len()).map(|j| x.values[self.layout.dc_col(j)]).collect();
        (ac, dc)
    }

    /// Packs voltage profiles into a state vector (slack entries are ignored).
    pub fn state_from_voltages(&self, ac: &[PhaseVector], dc: &[f64]) -> StateVector {
        let mut values = vec![0.0; self.layout.len()];
        for (i, e) in ac.iter().enumerate() {
            for p in 0..3 {
                if let (Some(r), Some(m)) = (self.layout.re_col(i, p), self.layout.im_col(i, p)) {
                    values[r] = e[p].re;
                    values[m] = e[p].im;
                }
            }
        }
        for (j, v) in dc.iter().enumerate() {
            values[self.layout.dc_col(j)] = *v;
        }
        StateVector { values }
    }

    pub fn operating_point(&self, x: &StateVector) -> OperatingPoint {
        let (ac_voltage, dc_voltage) = self.voltages(x);
        self.operating_point_from(ac_voltage, dc_voltage)
    }

    pub fn operating_point_from(&self, ac_voltage: Vec<PhaseVector>, dc_voltage: Vec<f64>) -> OperatingPoint {
        let ac_current = self.admittance.ac.currents(&ac_voltage);
        let dc_current = self.admittance.dc.currents(&dc_voltage);
        let converters = self
            .case
            .converters
            .iter()
            .enumerate()
            .map(|(k, conv)| {
                let (l, d) = self.case.converter_buses(k);
                ConverterTerminal::new(conv, &ac_voltage[l], &ac_current[l], dc_voltage[d], dc_current[d])
            })
            .collect();
        OperatingPoint { ac_voltage, ac_current, dc_voltage, dc_current, converters }
    }

    /// `F(x)` for one equation.
    pub fn function_value(&self, op: &OperatingPoint, eq: &Equation) -> f64 {
        match (eq.kind, eq.site) {
            (EquationKind::ActivePower, Site::AcPhase { bus, phase }) => {
                (op.ac_voltage[bus][phase] * op.ac_current[bus][phase].conj()).re
            }
            (EquationKind::ReactivePower, Site::AcPhase { bus, phase }) => {
                (op.ac_voltage[bus][phase] * op.ac_current[bus][phase].conj()).im
            }
            (EquationKind::VoltageMagnitude, Site::AcPhase { bus, phase }) => op.ac_voltage[bus][phase].norm_sqr(),
            (EquationKind::DcVoltage, Site::Dc { bus }) => op.dc_voltage[bus],
            (EquationKind::DcPower, Site::Dc { bus }) => op.dc_voltage[bus] * op.dc_current[bus],
            (kind, Site::Converter { index }) => {
                let t = &op.converters[index];
                match kind {
                    EquationKind::PositiveActive => match self.case.converters[index].mode {
                        ConverterMode::EdcQac { .. } => t.s_pos.re - t.loss_pos.s_loss.re - t.loss_pos.p_filter - t.p_dc,
                        _ => t.s_pos.re - t.loss_pos.s_loss.re,
                    },
                    EquationKind::PositiveReactive => t.s_pos.im - t.loss_pos.s_loss.im,
                    EquationKind::PositiveMagnitude => t.e_seq.positive.norm_sqr(),
                    EquationKind::NegativeActive => t.s_neg.re - t.loss_neg.s_loss.re,
                    EquationKind::NegativeReactive => t.s_neg.im - t.loss_neg.s_loss.im,
                    EquationKind::ZeroSequenceRe => t.e_seq.zero.re,
                    EquationKind::ZeroSequenceIm => t.e_seq.zero.im,
                    EquationKind::NegativeSequenceRe => t.e_seq.negative.re,
                    EquationKind::NegativeSequenceIm => t.e_seq.negative.im,
                    EquationKind::NegativeCurrentRe => t.i_seq.negative.re,
                    EquationKind::NegativeCurrentIm => t.i_seq.negative.im,
                    EquationKind::ConverterDcPower => t.p_dc + t.loss_pos.p_filter + t.loss_neg.p_filter,
                    _ => unreachable!("{kind:?} is not a converter equation"),
                }
            }
            (kind, site) => unreachable!("{kind:?} at {site:?}"),
        }
    }

    /// `y* − F(x)` in block order.
    pub fn residuals_at(&self, op: &OperatingPoint) -> ResidualVector {
        let values = self
            .equations
            .iter()
            .zip(&self.targets)
            .map(|(eq, t)| t - self.function_value(op, eq))
            .collect();
        ResidualVector { values, labels: Arc::clone(&self.labels) }
    }

    pub fn assemble_residuals(&self, x: &StateVector) -> Result<ResidualVector, ModelError> {
        if x.len() != self.layout.len() {
            return Err(ModelError::Dimension { expected: self.layout.len(), got: x.len() });
        }
        Ok(self.residuals_at(&self.operating_point(x)))
    }

    fn residual_of(&self, op: &OperatingPoint, kind: EquationKind, site: Site) -> f64 {
        let eq = Equation { kind, site };
        target(self.case, &eq, self.warm_up) - self.function_value(op, &eq)
    }

    /// `(P* − P, Q* − Q)` of one phase of a PQ bus.
    pub fn residual_pq(&self, op: &OperatingPoint, bus: usize, phase: Phase) -> (f64, f64) {
        debug_assert!(matches!(self.case.ac_buses[bus].kind, AcBusKind::Pq { .. }));
        let site = Site::AcPhase { bus, phase: phase.index() };
        (
            self.residual_of(op, EquationKind::ActivePower, site),
            self.residual_of(op, EquationKind::ReactivePower, site),
        )
    }

    /// `(P* − P, E*² − |E|²)` of one phase of a PV bus.
    pub fn residual_pv(&self, op: &OperatingPoint, bus: usize, phase: Phase) -> (f64, f64) {
        debug_assert!(matches!(self.case.ac_buses[bus].kind, AcBusKind::Pv { .. }));
        let site = Site::AcPhase { bus, phase: phase.index() };
        (
            self.residual_of(op, EquationKind::ActivePower, site),
            self.residual_of(op, EquationKind::VoltageMagnitude, site),
        )
    }

    pub fn residual_dc_p(&self, op: &OperatingPoint, bus: usize) -> f64 {
        debug_assert!(matches!(self.case.dc_buses[bus].kind, DcBusKind::P { .. }));
        self.residual_of(op, EquationKind::DcPower, Site::Dc { bus })
    }

    pub fn residual_dc_v(&self, op: &OperatingPoint, bus: usize) -> f64 {
        debug_assert!(matches!(self.case.dc_buses[bus].kind, DcBusKind::V { .. }));
        self.residual_of(op, EquationKind::DcVoltage, Site::Dc { bus })
    }

    /// Residuals of converter `index` in its own block order.
    pub fn residual_converter(&self, op: &OperatingPoint, index: usize) -> ConverterResiduals {
        let conv = &self.case.converters[index];
        let site = Site::Converter { index };
        let kinds = converter_ac_kinds(conv.mode.clone(), conv.sequence, self.warm_up);
        let ac = kinds.map(|k| (k, self.residual_of(op, k, site)));
        let (_, dc_bus) = self.case.converter_buses(index);
        let dc = match conv.mode {
            ConverterMode::EdcQac { .. } => {
                (EquationKind::DcVoltage, self.residual_of(op, EquationKind::DcVoltage, Site::Dc { bus: dc_bus }))
            }
            _ => (EquationKind::ConverterDcPower, self.residual_of(op, EquationKind::ConverterDcPower, site)),
        };
        ConverterResiduals { ac, dc }
    }

    pub fn residual_ic_edc_q(&self, op: &OperatingPoint, index: usize) -> ConverterResiduals {
        debug_assert!(matches!(self.case.converters[index].mode, ConverterMode::EdcQac { .. }));
        self.residual_converter(op, index)
    }

    pub fn residual_ic_pac_qac(&self, op: &OperatingPoint, index: usize) -> ConverterResiduals {
        debug_assert!(matches!(self.case.converters[index].mode, ConverterMode::PacQac { .. }));
        self.residual_converter(op, index)
    }

    pub fn residual_ic_pac_vac(&self, op: &OperatingPoint, index: usize) -> ConverterResiduals {
        debug_assert!(matches!(self.case.converters[index].mode, ConverterMode::PacVac { .. }));
        self.residual_converter(op, index)
    }

    /// DC voltage of converter `index` from the closed-form power balance,
    /// using the power the converter delivers to the DC grid at `op`.
    pub fn feasible_dc_root(&self, op: &OperatingPoint, index: usize) -> Result<f64, DcRootError> {
        let (_, k) = self.case.converter_buses(index);
        let t = &op.converters[index];
        let power = t.p_ac() - t.p_loss_total();
        let mut y_kk = 0.0;
        let mut coupling = 0.0;
        for &(m, y) in self.admittance.dc.row(k) {
            if m == k {
                y_kk = y;
            } else {
                coupling += y * op.dc_voltage[m];
            }
        }
        feasible_root(y_kk, coupling, power)
    }
}

/// Negative-sequence voltage used to start a converter with negative-sequence
/// injection. At a balanced start both `E-` and `I-` vanish and the
/// negative-sequence power rows have no sensitivity, so the start is offset by
/// the magnitude that would carry the setpoint through the bus self admittance.
pub fn negative_sequence_seed(case: &NetworkCase, admittance: &CompoundAdmittance, index: usize) -> Complex64 {
    let conv = &case.converters[index];
    let (s_neg, with_neg) = match conv.mode {
        ConverterMode::PacQac { p_neg, q_neg, .. } => {
            (Complex64::new(p_neg, q_neg), conv.sequence == SequencePolicy::WithNegative)
        }
        _ => (Complex64::default(), false),
    };
    if !with_neg {
        return Complex64::default();
    }
    let (l, _) = case.converter_buses(index);
    let y_ll = admittance.ac.block(l, l).copied().unwrap_or_else(PhaseMatrix::zeros);
    let y_neg = (forward_matrix() * y_ll * inverse_matrix())[(2, 2)].norm();
    let mag = if y_neg > 0.0 { (s_neg.norm() / (3.0 * y_neg)).sqrt() } else { 0.0 };
    Complex64::new(mag.clamp(1e-3, 0.2), 0.0)
}

fn converter_ac_kinds(mode: ConverterMode, sequence: SequencePolicy, warm_up: bool) -> [EquationKind; 6] {
    use EquationKind::*;
    let second = match mode {
        ConverterMode::PacVac { .. } => PositiveMagnitude,
        _ => PositiveReactive,
    };
    let (neg_re, neg_im) = match sequence {
        SequencePolicy::WithNegative if warm_up => (NegativeCurrentRe, NegativeCurrentIm),
        SequencePolicy::WithNegative => (NegativeActive, NegativeReactive),
        SequencePolicy::PositiveOnly => (NegativeSequenceRe, NegativeSequenceIm),
    };
    [PositiveActive, second, ZeroSequenceRe, neg_re, ZeroSequenceIm, neg_im]
}

fn equation_order(case: &NetworkCase, warm_up: bool) -> Vec<Equation> {
    use EquationKind::*;
    let mut p_ac = Vec::new();
    let mut q_ac = Vec::new();
    for (bus, b) in case.ac_buses.iter().enumerate() {
        let second = match b.kind {
            AcBusKind::Pq { .. } => ReactivePower,
            AcBusKind::Pv { .. } => VoltageMagnitude,
            _ => continue,
        };
        for phase in 0..3 {
            let site = Site::AcPhase { bus, phase };
            p_ac.push(Equation { kind: ActivePower, site });
            q_ac.push(Equation { kind: second, site });
        }
    }
    let mut e_dc = Vec::new();
    let mut p_dc = Vec::new();
    for (bus, b) in case.dc_buses.iter().enumerate() {
        let site = Site::Dc { bus };
        match b.kind {
            DcBusKind::V { .. } => e_dc.push(Equation { kind: DcVoltage, site }),
            DcBusKind::P { .. } => p_dc.push(Equation { kind: DcPower, site }),
            DcBusKind::ConverterDc => {
                let index = case.converter_at_dc(bus).expect("validated converter link");
                match case.converters[index].mode {
                    ConverterMode::EdcQac { .. } => e_dc.push(Equation { kind: DcVoltage, site }),
                    _ => p_dc.push(Equation { kind: ConverterDcPower, site: Site::Converter { index } }),
                }
            }
        }
    }
    // Converter AC rows: six slots each, grouped slot by slot.
    let kinds: Vec<[EquationKind; 6]> = case
        .converters
        .iter()
        .map(|c| converter_ac_kinds(c.mode.clone(), c.sequence, warm_up))
        .collect();
    let mut out = p_ac;
    out.extend(q_ac);
    out.extend(e_dc);
    for slot in 0..6 {
        out.extend(kinds.iter().enumerate().map(|(index, k)| Equation { kind: k[slot], site: Site::Converter { index } }));
    }
    out.extend(p_dc);
    out
}

fn target(case: &NetworkCase, eq: &Equation, warm_up: bool) -> f64 {
    use EquationKind::*;
    match (eq.kind, eq.site) {
        (ActivePower, Site::AcPhase { bus, phase }) => match &case.ac_buses[bus].kind {
            AcBusKind::Pq { p, .. } | AcBusKind::Pv { p, .. } => p[phase],
            _ => unreachable!(),
        },
        (ReactivePower, Site::AcPhase { bus, phase }) => match &case.ac_buses[bus].kind {
            AcBusKind::Pq { q, .. } => q[phase],
            _ => unreachable!(),
        },
        (VoltageMagnitude, Site::AcPhase { bus, .. }) => match &case.ac_buses[bus].kind {
            AcBusKind::Pv { v_mag, .. } => v_mag * v_mag,
            _ => unreachable!(),
        },
        (DcVoltage, Site::Dc { bus }) => match case.dc_buses[bus].kind {
            DcBusKind::V { v } => v,
            DcBusKind::ConverterDc => match case.converters[case.converter_at_dc(bus).unwrap()].mode {
                ConverterMode::EdcQac { e_dc, .. } => e_dc,
                _ => unreachable!(),
            },
            _ => unreachable!(),
        },
        (DcPower, Site::Dc { bus }) => match case.dc_buses[bus].kind {
            DcBusKind::P { p } => p,
            _ => unreachable!(),
        },
        (kind, Site::Converter { index }) => {
            let conv = &case.converters[index];
            let with_neg = conv.sequence == SequencePolicy::WithNegative && !warm_up;
            match (kind, &conv.mode) {
                (PositiveActive, ConverterMode::EdcQac { .. }) => 0.0,
                (PositiveActive, ConverterMode::PacQac { p_pos, .. } | ConverterMode::PacVac { p_pos, .. }) => *p_pos,
                (PositiveReactive, ConverterMode::EdcQac { q_ac, .. }) => *q_ac,
                (PositiveReactive, ConverterMode::PacQac { q_pos, .. }) => *q_pos,
                (PositiveMagnitude, ConverterMode::PacVac { v_ac, .. }) => v_ac * v_ac,
                (NegativeActive, ConverterMode::PacQac { p_neg, .. }) => *p_neg,
                (NegativeReactive, ConverterMode::PacQac { q_neg, .. }) => *q_neg,
                (ZeroSequenceRe | ZeroSequenceIm | NegativeSequenceRe | NegativeSequenceIm, _) => 0.0,
                (NegativeCurrentRe | NegativeCurrentIm, _) => 0.0,
                (ConverterDcPower, ConverterMode::PacQac { p_pos, p_neg, .. }) => {
                    p_pos + if with_neg { *p_neg } else { 0.0 }
                }
                (ConverterDcPower, ConverterMode::PacVac { p_pos, .. }) => *p_pos,
                (kind, mode) => unreachable!("{kind:?} in mode {mode:?}"),
            }
        }
        (kind, site) => unreachable!("{kind:?} at {site:?}"),
    }
}

fn label(case: &NetworkCase, eq: &Equation) -> String {
    match eq.site {
        Site::AcPhase { bus, phase } => {
            format!("{}[ac {}.{}]", eq.kind.tag(), case.ac_buses[bus].id, Phase::ALL[phase])
        }
        Site::Dc { bus } => format!("{}[dc {}]", eq.kind.tag(), case.dc_buses[bus].id),
        Site::Converter { index } => {
            let c = &case.converters[index];
            let at = match eq.kind {
                EquationKind::ConverterDcPower => format!("dc {}", c.dc_bus),
                _ => format!("ac {}", c.ac_bus),
            };
            format!("{}[{}, converter {}]", eq.kind.tag(), at, c.id)
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:?}", self.kind.tag(), self.site)
    }
}
