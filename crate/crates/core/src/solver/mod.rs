//! Newton-Raphson driver.

pub mod jacobian;
pub mod linear;
mod options;
pub mod report;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::sequence::balanced_set;
use num_complex::Complex64;

use crate::grid::{
    phase_to_sequence, sequence_to_phase, AcBusKind, ConverterMode, DcBusKind, NetworkCase, SequencePolicy, SequenceSet,
};
use crate::residuals::{negative_sequence_seed, Model, ModelError, OperatingPoint, ResidualVector, StateVector};
pub use jacobian::JacobianBuilder;
pub use linear::{LinearError, LuSolver, SparseMatrix};
pub use options::{InitialGuess, JacobianMode, SolverOptions};
pub use report::{AcBranchFlow, AcBusVoltage, ConverterReport, DcBranchFlow, DcBusVoltage, SlackInjection};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    InvalidCase(#[from] ModelError),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("initial state has {got} entries, expected {expected}")]
    InitialState { expected: usize, got: usize },
    #[error("singular Jacobian at iteration {iteration} (row {row}: {label})")]
    Singular { iteration: usize, row: usize, label: String },
    #[error("mismatch became non-finite at iteration {iteration} ({label}); the operating point is likely infeasible")]
    Diverged { iteration: usize, label: String },
}

/// One mismatch evaluation of the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mismatch: f64,
    pub worst_equation: String,
    /// Fraction of the Newton step taken to reach this state (1 at the start).
    pub step: f64,
}

/// Wall-clock time spent in each stage of the solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub setup: Duration,
    pub mismatch: Duration,
    pub jacobian: Duration,
    pub linear_solve: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub case_name: String,
    pub converged: bool,
    /// Number of mismatch evaluations, counting the initial one.
    pub iterations: usize,
    pub tolerance: f64,
    pub residual_history: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub state: Vec<f64>,
    pub ac_voltages: Vec<AcBusVoltage>,
    pub dc_voltages: Vec<DcBusVoltage>,
    pub converters: Vec<ConverterReport>,
    pub slack: Vec<SlackInjection>,
    pub ac_branches: Vec<AcBranchFlow>,
    pub dc_branches: Vec<DcBranchFlow>,
    /// Worst relative deviation between the analytic and the finite
    /// difference Jacobian, when checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_check: Option<f64>,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl Solution {
    pub fn final_mismatch(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn state_vector(&self) -> StateVector {
        StateVector { values: self.state.clone() }
    }
}

/// A case prepared for repeated solves.
#[derive(Debug, Clone)]
pub struct PowerFlow<'a> {
    model: Model<'a>,
    jacobian: JacobianBuilder,
    setup: Duration,
}

impl<'a> PowerFlow<'a> {
    pub fn new(case: &'a NetworkCase) -> Result<Self, SolveError> {
        let start = Instant::now();
        let model = Model::new(case)?;
        let jacobian = JacobianBuilder::new(&model);
        Ok(Self { model, jacobian, setup: start.elapsed() })
    }

    pub fn model(&self) -> &Model<'a> {
        &self.model
    }

    pub fn n_states(&self) -> usize {
        self.model.len()
    }

    /// Flat start: balanced voltages at the slack angle, PV magnitudes, DC
    /// voltage setpoints where the bus has one and 1 p.u. elsewhere.
    pub fn flat_start(&self) -> StateVector {
        let case = self.model.case();
        let angle = case
            .ac_buses
            .iter()
            .find_map(|b| match b.kind {
                AcBusKind::Slack { angle, .. } => Some(angle),
                _ => None,
            })
            .unwrap_or(0.0);
        let ac: Vec<_> = case
            .ac_buses
            .iter()
            .map(|b| match b.kind {
                AcBusKind::Pv { v_mag, .. } => balanced_set(v_mag, angle),
                AcBusKind::Slack { v_mag, angle } => balanced_set(v_mag, angle),
                _ => balanced_set(1.0, angle),
            })
            .collect();
        let dc: Vec<_> = case
            .dc_buses
            .iter()
            .enumerate()
            .map(|(j, b)| match b.kind {
                DcBusKind::V { v } => v,
                DcBusKind::ConverterDc => match case.converter_at_dc(j).map(|k| &case.converters[k].mode) {
                    Some(ConverterMode::EdcQac { e_dc, .. }) => *e_dc,
                    _ => 1.0,
                },
                DcBusKind::P { .. } => 1.0,
            })
            .collect();
        self.model.state_from_voltages(&ac, &dc)
    }

    pub fn mismatch(&self, x: &StateVector) -> Result<ResidualVector, SolveError> {
        Ok(self.model.assemble_residuals(x)?)
    }

    /// Analytic Jacobian at `x`.
    pub fn jacobian(&self, x: &StateVector) -> SparseMatrix {
        let op = self.model.operating_point(x);
        self.jacobian.build(&self.model, &op)
    }

    /// Newton step `Δx` with `J·Δx = y* − F(x)`.
    pub fn nr_step(&self, x: &StateVector) -> Result<Vec<f64>, LinearError> {
        let r = self.model.residuals_at(&self.model.operating_point(x));
        let mut j = self.jacobian(x);
        linear::solve(&mut j, &r.values)
    }

    pub fn solve(&self, options: &SolverOptions) -> Result<Solution, SolveError> {
        if !(options.tolerance > 0.0) || options.max_iterations == 0 {
            return Err(SolveError::InvalidOptions(format!(
                "tolerance {} must be positive and max_iterations {} at least 1",
                options.tolerance, options.max_iterations
            )));
        }
        if let JacobianMode::FiniteDifferenceCheck(h) = options.jacobian_mode {
            if !(h > 0.0) {
                return Err(SolveError::InvalidOptions(format!("finite difference step {h} must be positive")));
            }
        }
        let t_total = Instant::now();
        let mut run = Run {
            history: Vec::new(),
            trace: Vec::new(),
            timings: StageTimings { setup: self.setup, ..Default::default() },
            fd_step: match options.jacobian_mode {
                JacobianMode::Analytic => None,
                JacobianMode::FiniteDifferenceCheck(h) => Some(h),
            },
            jacobian_check: None,
        };
        let mut x = match &options.init {
            InitialGuess::FlatStart => self.flat_start(),
            InitialGuess::Provided(x) => {
                if x.len() != self.model.len() {
                    return Err(SolveError::InitialState { expected: self.model.len(), got: x.len() });
                }
                x.clone()
            }
        };

        let case = self.model.case();
        let needs_warm_up = matches!(options.init, InitialGuess::FlatStart)
            && case.converters.iter().any(|c| c.sequence == SequencePolicy::WithNegative);
        if needs_warm_up {
            let warm = Model::negative_sequence_warm_up(case)?;
            let jac = JacobianBuilder::new(&warm);
            let tol = options.tolerance.max(1e-6);
            let (done, x_warm, _) = iterate(&warm, &jac, x, tol, options.max_iterations, options.step_halving, &mut run)?;
            x = x_warm;
            log::info!("negative-sequence warm-up finished after {} evaluations (converged: {done})", run.history.len());
            // A balanced network leaves E- = I- = 0, where the power rows have no sensitivity.
            let (mut ac, dc) = self.model.voltages(&x);
            for k in 0..case.converters.len() {
                let (l, _) = case.converter_buses(k);
                let seed = negative_sequence_seed(case, self.model.admittance(), k);
                if seed != Complex64::default() && phase_to_sequence(&ac[l]).negative.norm() < 1e-6 {
                    ac[l] += sequence_to_phase(&SequenceSet::new(Default::default(), Default::default(), seed));
                }
            }
            x = self.model.state_from_voltages(&ac, &dc);
        }

        let remaining = options.max_iterations.saturating_sub(run.history.len()).max(1);
        let (converged, x, op) =
            iterate(&self.model, &self.jacobian, x, options.tolerance, remaining, options.step_halving, &mut run)?;
        run.timings.total = t_total.elapsed() + self.setup;

        let (ac_voltages, dc_voltages) = report::voltages(&self.model, &op);
        let (ac_branches, dc_branches) = report::branch_flows(&self.model, &op);
        Ok(Solution {
            case_name: case.name.clone(),
            converged,
            iterations: run.history.len(),
            tolerance: options.tolerance,
            residual_history: run.history,
            trace: run.trace,
            state: x.values,
            ac_voltages,
            dc_voltages,
            converters: report::converters(&self.model, &op),
            slack: report::slack_injections(&self.model, &op),
            ac_branches,
            dc_branches,
            jacobian_check: run.jacobian_check,
            timings: run.timings,
        })
    }
}

struct Run {
    history: Vec<f64>,
    trace: Vec<IterationRecord>,
    timings: StageTimings,
    fd_step: Option<f64>,
    jacobian_check: Option<f64>,
}

/// Largest `|J − J_fd| / max(1, |J_fd|)` over all entries.
fn fd_deviation(model: &Model<'_>, x: &StateVector, jac: &SparseMatrix, h: f64) -> f64 {
    let dense = jac.to_dense();
    let n = x.len();
    let mut worst = 0.0f64;
    for col in 0..n {
        let step = h * x.values[col].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.values[col] += step;
        xm.values[col] -= step;
        let fp = model.residuals_at(&model.operating_point(&xp)).values;
        let fm = model.residuals_at(&model.operating_point(&xm)).values;
        for row in 0..n {
            let fd = -(fp[row] - fm[row]) / (2.0 * step);
            worst = worst.max((dense[(row, col)] - fd).abs() / fd.abs().max(1.0));
        }
    }
    worst
}

/// Newton iterations on `model` from `x`; at most `max_evals` mismatch evaluations.
fn iterate(
    model: &Model<'_>,
    jacobian: &JacobianBuilder,
    mut x: StateVector,
    tolerance: f64,
    max_evals: usize,
    step_halving: bool,
    run: &mut Run,
) -> Result<(bool, StateVector, OperatingPoint), SolveError> {
    let labels = model.labels().clone();
    let label = |row: Option<usize>| row.map_or_else(|| "-".to_string(), |r| labels[r].clone());

    let t = Instant::now();
    let mut op = model.operating_point(&x);
    let mut r = model.residuals_at(&op);
    run.timings.mismatch += t.elapsed();

    let mut lu = LuSolver::default();
    let mut evals = 0;
    let mut step = 1.0;
    let converged = loop {
        let (norm, worst) = r.max_abs();
        evals += 1;
        run.history.push(norm);
        let iteration = run.history.len();
        run.trace.push(IterationRecord { iteration, mismatch: norm, worst_equation: label(worst), step });
        log::debug!("iteration {iteration}: |F|inf = {norm:.3e} at {}", label(worst));
        if !norm.is_finite() {
            return Err(SolveError::Diverged { iteration, label: label(worst) });
        }
        if norm < tolerance {
            break true;
        }
        if evals >= max_evals {
            break false;
        }

        let t = Instant::now();
        let mut jac = jacobian.build(model, &op);
        run.timings.jacobian += t.elapsed();
        if let Some(h) = run.fd_step {
            let dev = fd_deviation(model, &x, &jac, h);
            if dev > 1e-5 {
                log::warn!("iteration {iteration}: analytic Jacobian deviates from finite differences by {dev:.3e}");
            }
            run.jacobian_check = Some(run.jacobian_check.map_or(dev, |d| d.max(dev)));
        }
        let t = Instant::now();
        let dx = lu.solve(&mut jac, &r.values).map_err(|e| match e {
            LinearError::Singular { row } => SolveError::Singular { iteration, row, label: labels[row].clone() },
            LinearError::Assembly(msg) => SolveError::Singular { iteration, row: 0, label: msg },
        })?;
        run.timings.linear_solve += t.elapsed();

        let t = Instant::now();
        step = 1.0;
        let mut trial = advance(&x, &dx, step);
        let mut op_t = model.operating_point(&trial);
        let mut r_t = model.residuals_at(&op_t);
        if step_halving && !(r_t.norm_inf() <= norm) {
            log::info!("iteration {iteration}: mismatch grew from {norm:.3e} to {:.3e}, halving the step", r_t.norm_inf());
            for _ in 0..10 {
                step *= 0.5;
                trial = advance(&x, &dx, step);
                op_t = model.operating_point(&trial);
                r_t = model.residuals_at(&op_t);
                if r_t.norm_inf() <= norm {
                    break;
                }
            }
        }
        run.timings.mismatch += t.elapsed();
        x = trial;
        op = op_t;
        r = r_t;
    };
    Ok((converged, x, op))
}

fn advance(x: &StateVector, dx: &[f64], scale: f64) -> StateVector {
    StateVector { values: x.values.iter().zip(dx).map(|(a, d)| a + scale * d).collect() }
}

/// Solves `case` with `options`.
pub fn solve(case: &NetworkCase, options: &SolverOptions) -> Result<Solution, SolveError> {
    PowerFlow::new(case)?.solve(options)
}
