//! Independent reference computations used to cross-check the Newton solver.
//!
//! * [`fixed_point_solve`]: nonlinear block Gauss-Seidel on the bus voltages.
//! * [`fd_jacobian`]: central-difference Jacobian of any vector function.
//! * [`quadratic_root_scan`]: real roots of the DC power balance by bracketing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::converter::{converter_losses, LossParams};
use crate::grid::sequence::{balanced_set, forward_matrix, inverse_matrix};
use crate::grid::{
    AcBusKind, CompoundAdmittance, Converter, ConverterMode, DcBusKind, NetworkCase, PhaseMatrix, PhaseVector,
    SequencePolicy,
};
use crate::residuals::{negative_sequence_seed, Model, ModelError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("diagonal block of AC bus {0} is singular")]
    SingularBlock(u32),
    #[error("fixed point iteration produced a non-finite voltage after {0} sweeps")]
    Diverged(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Stop once the mismatch infinity norm is below this value.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Over-relaxation factor applied to PQ bus updates.
    pub acceleration: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_sweeps: 200_000, acceleration: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub converged: bool,
    pub sweeps: usize,
    pub mismatch: f64,
    pub ac_voltage: Vec<PhaseVector>,
    pub dc_voltage: Vec<f64>,
}

impl OracleSolution {
    /// Largest voltage difference to another solution of the same case.
    pub fn max_voltage_difference(&self, ac: &[PhaseVector], dc: &[f64]) -> f64 {
        let a = self
            .ac_voltage
            .iter()
            .zip(ac)
            .flat_map(|(x, y)| (0..3).map(move |p| (x[p] - y[p]).norm()))
            .fold(0.0, f64::max);
        let d = self.dc_voltage.iter().zip(dc).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        a.max(d)
    }
}

struct Prepared<'c> {
    case: &'c NetworkCase,
    y: CompoundAdmittance,
    diag_inv: Vec<Option<PhaseMatrix>>,
    t: PhaseMatrix,
    t_inv: PhaseMatrix,
}

impl Prepared<'_> {
    /// `Σ_{n≠i} Y_in·E_n`.
    fn rest(&self, i: usize, e: &[PhaseVector]) -> PhaseVector {
        self.y
            .ac
            .row(i)
            .iter()
            .filter(|(n, _)| *n != i)
            .fold(PhaseVector::zeros(), |acc, (n, b)| acc + b * e[*n])
    }

    fn y_ii(&self, i: usize) -> PhaseMatrix {
        self.y.ac.block(i, i).copied().unwrap_or_else(PhaseMatrix::zeros)
    }

    fn dc_rest(&self, j: usize, e: &[f64]) -> (f64, f64) {
        let mut own = 0.0;
        let mut rest = 0.0;
        for &(m, g) in self.y.dc.row(j) {
            if m == j {
                own = g;
            } else {
                rest += g * e[m];
            }
        }
        (own, rest)
    }
}

/// Solves the power flow of `case` by nonlinear block Gauss-Seidel.
///
/// PQ and PV buses use the classical current-injection update. Converter AC
/// buses are solved in the sequence domain with a local Newton iteration on
/// `E+` (and `E-` with negative-sequence injection), holding neighbouring
/// voltages fixed. DC buses use the scalar current-injection update.
pub fn fixed_point_solve(case: &NetworkCase, options: &OracleOptions) -> Result<OracleSolution, OracleError> {
    let model = Model::new(case)?;
    let y = model.admittance().clone();
    let diag_inv = case
        .ac_buses
        .iter()
        .enumerate()
        .map(|(i, b)| match b.kind {
            AcBusKind::Pq { .. } | AcBusKind::Pv { .. } => y
                .ac
                .block(i, i)
                .and_then(|m| m.try_inverse())
                .map(Some)
                .ok_or(OracleError::SingularBlock(b.id)),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let prep = Prepared { case, y, diag_inv, t: forward_matrix(), t_inv: inverse_matrix() };

    let angle = case
        .ac_buses
        .iter()
        .find_map(|b| match b.kind {
            AcBusKind::Slack { angle, .. } => Some(angle),
            _ => None,
        })
        .unwrap_or(0.0);
    let mut ac: Vec<PhaseVector> = case
        .ac_buses
        .iter()
        .map(|b| match b.kind {
            AcBusKind::Slack { v_mag, angle } => balanced_set(v_mag, angle),
            AcBusKind::Pv { v_mag, .. } => balanced_set(v_mag, angle),
            _ => balanced_set(1.0, angle),
        })
        .collect();
    let mut dc: Vec<f64> = case
        .dc_buses
        .iter()
        .enumerate()
        .map(|(j, b)| match b.kind {
            DcBusKind::V { v } => v,
            DcBusKind::ConverterDc => match &case.converters[case.converter_at_dc(j).unwrap()].mode {
                ConverterMode::EdcQac { e_dc, .. } => *e_dc,
                _ => 1.0,
            },
            DcBusKind::P { .. } => 1.0,
        })
        .collect();

    let mut sweeps = 0;
    if case.converters.iter().any(|c| c.sequence == SequencePolicy::WithNegative) {
        // Same start as the Newton solver: first hold the negative-sequence
        // converter current at zero, then switch to the power setpoints.
        let warm = Model::negative_sequence_warm_up(case)?;
        let (_, n) = run_sweeps(&prep, &warm, &mut ac, &mut dc, options.tolerance.max(1e-9), options, true)?;
        sweeps += n;
        for k in 0..case.converters.len() {
            let l = case.ac_index(case.converters[k].ac_bus).unwrap();
            let seed = negative_sequence_seed(case, &prep.y, k);
            if seed != Complex64::default() && (prep.t * ac[l])[2].norm() < 1e-6 {
                ac[l] += prep.t_inv * PhaseVector::new(Complex64::default(), Complex64::default(), seed);
            }
        }
    }
    let (mismatch, n) = run_sweeps(&prep, &model, &mut ac, &mut dc, options.tolerance, options, false)?;
    sweeps += n;
    Ok(OracleSolution { converged: mismatch <= options.tolerance, sweeps, mismatch, ac_voltage: ac, dc_voltage: dc })
}

/// Sweeps until the mismatch of `model` drops to `tolerance`; returns the
/// final mismatch and the number of sweeps.
fn run_sweeps(
    prep: &Prepared<'_>,
    model: &Model<'_>,
    ac: &mut [PhaseVector],
    dc: &mut [f64],
    tolerance: f64,
    options: &OracleOptions,
    warm_up: bool,
) -> Result<(f64, usize), OracleError> {
    let check_every = 5;
    let mut mismatch = f64::INFINITY;
    for sweep in 1..=options.max_sweeps {
        sweep_ac(prep, ac, dc, options.acceleration, warm_up);
        sweep_dc(prep, ac, dc, warm_up);
        if ac.iter().any(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) || dc.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::Diverged(sweep));
        }
        if sweep % check_every == 0 || sweep == options.max_sweeps {
            let op = model.operating_point_from(ac.to_vec(), dc.to_vec());
            mismatch = model.residuals_at(&op).norm_inf();
            if mismatch <= tolerance {
                return Ok((mismatch, sweep));
            }
        }
    }
    Ok((mismatch, options.max_sweeps))
}

fn sweep_ac(prep: &Prepared<'_>, ac: &mut [PhaseVector], dc: &[f64], omega: f64, warm_up: bool) {
    let case = prep.case;
    for i in 0..case.ac_buses.len() {
        match &case.ac_buses[i].kind {
            AcBusKind::Slack { .. } => {}
            AcBusKind::Pq { p, q } => {
                let e = ac[i];
                let rest = prep.rest(i, ac);
                let inj = PhaseVector::from_fn(|k, _| (Complex64::new(p[k], q[k]) / e[k]).conj());
                let new = prep.diag_inv[i].unwrap() * (inj - rest);
                ac[i] = e + (new - e) * Complex64::new(omega, 0.0);
            }
            AcBusKind::Pv { p, v_mag } => {
                let e = ac[i];
                let rest = prep.rest(i, ac);
                let cur = prep.y_ii(i) * e + rest;
                let inj = PhaseVector::from_fn(|k, _| {
                    let q = (e[k] * cur[k].conj()).im;
                    (Complex64::new(p[k], q) / e[k]).conj()
                });
                let new = prep.diag_inv[i].unwrap() * (inj - rest);
                ac[i] = new.map(|z| z * (*v_mag / z.norm()));
            }
            AcBusKind::ConverterAc => {
                let k = case.converter_at_ac(i).unwrap();
                let d = case.dc_index(case.converters[k].dc_bus).unwrap();
                let rest = prep.rest(i, ac);
                let (own, dc_rest) = prep.dc_rest(d, dc);
                let p_dc = dc[d] * (own * dc[d] + dc_rest);
                ac[i] = converter_node(prep, &case.converters[k], ac[i], rest, prep.y_ii(i), dc[d], p_dc, warm_up);
            }
        }
    }
}

fn sweep_dc(prep: &Prepared<'_>, ac: &[PhaseVector], dc: &mut [f64], warm_up: bool) {
    let case = prep.case;
    for j in 0..case.dc_buses.len() {
        let target = match case.dc_buses[j].kind {
            DcBusKind::V { .. } => continue,
            DcBusKind::P { p } => p,
            DcBusKind::ConverterDc => {
                let k = case.converter_at_dc(j).unwrap();
                let conv = &case.converters[k];
                let rf = conv.z_filter.re;
                let l = case.ac_index(conv.ac_bus).unwrap();
                let cur = prep.y_ii(l) * ac[l] + prep.rest(l, ac);
                let i_seq = prep.t * cur;
                let mut fil = 3.0 * rf * i_seq[1].norm_sqr();
                match conv.mode {
                    ConverterMode::EdcQac { .. } => continue,
                    ConverterMode::PacQac { p_pos, p_neg, .. } => {
                        let mut target = p_pos;
                        if conv.sequence == SequencePolicy::WithNegative && !warm_up {
                            target += p_neg;
                            fil += 3.0 * rf * i_seq[2].norm_sqr();
                        }
                        target - fil
                    }
                    ConverterMode::PacVac { p_pos, .. } => p_pos - fil,
                }
            }
        };
        let (own, rest) = prep.dc_rest(j, dc);
        dc[j] = (target / dc[j] - rest) / own;
    }
}

/// Local equations of a converter AC bus as functions of `(E+, E-)`.
#[allow(clippy::too_many_arguments)]
fn converter_equations(
    prep: &Prepared<'_>,
    conv: &Converter,
    u: &[f64],
    rest: &PhaseVector,
    y_ll: &PhaseMatrix,
    e_dc: f64,
    p_dc: f64,
    warm_up: bool,
) -> Vec<f64> {
    let e_pos = Complex64::new(u[0], u[1]);
    let e_neg = if u.len() > 2 { Complex64::new(u[2], u[3]) } else { Complex64::default() };
    let e_abc = prep.t_inv * PhaseVector::new(Complex64::default(), e_pos, e_neg);
    let i_seq = prep.t * (y_ll * e_abc + rest);
    let s_pos = -3.0 * e_pos * i_seq[1].conj();
    let params: &LossParams = &conv.losses;
    let loss = 3.0 * converter_losses(i_seq[1], e_dc, params).s_loss.re;
    let fil = 3.0 * conv.z_filter.re * i_seq[1].norm_sqr();
    let mut g = match conv.mode {
        ConverterMode::EdcQac { q_ac, .. } => vec![s_pos.re - loss - fil - p_dc, s_pos.im - q_ac],
        ConverterMode::PacQac { p_pos, q_pos, .. } => vec![s_pos.re - loss - p_pos, s_pos.im - q_pos],
        ConverterMode::PacVac { p_pos, v_ac } => vec![s_pos.re - loss - p_pos, e_pos.norm_sqr() - v_ac * v_ac],
    };
    if let (SequencePolicy::WithNegative, ConverterMode::PacQac { p_neg, q_neg, .. }) = (conv.sequence, &conv.mode) {
        if warm_up {
            g.push(i_seq[2].re);
            g.push(i_seq[2].im);
            return g;
        }
        let s_neg = -3.0 * e_neg * i_seq[2].conj();
        let mag = i_seq[2].norm();
        let loss_neg = 3.0 * params.r_eq().eval(mag) * mag * mag;
        g.push(s_neg.re - loss_neg - p_neg);
        g.push(s_neg.im - q_neg);
    }
    g
}

#[allow(clippy::too_many_arguments)]
fn converter_node(
    prep: &Prepared<'_>,
    conv: &Converter,
    e: PhaseVector,
    rest: PhaseVector,
    y_ll: PhaseMatrix,
    e_dc: f64,
    p_dc: f64,
    warm_up: bool,
) -> PhaseVector {
    let seq = prep.t * e;
    let with_neg = conv.sequence == SequencePolicy::WithNegative;
    let mut u = vec![seq[1].re, seq[1].im];
    if with_neg {
        u.extend([seq[2].re, seq[2].im]);
    }
    let f = |u: &[f64]| converter_equations(prep, conv, u, &rest, &y_ll, e_dc, p_dc, warm_up);
    for _ in 0..50 {
        let g = f(&u);
        if g.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        let jac = fd_jacobian(f, &u, 1e-7);
        let Some(step) = jac.lu().solve(&DVector::from_vec(g)) else { break };
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }
        for (a, s) in u.iter_mut().zip(step.iter()) {
            *a -= s;
        }
        if step.amax() < 1e-15 {
            break;
        }
    }
    let e_neg = if with_neg { Complex64::new(u[2], u[3]) } else { Complex64::default() };
    prep.t_inv * PhaseVector::new(Complex64::default(), Complex64::new(u[0], u[1]), e_neg)
}

/// Central-difference Jacobian `∂f_i/∂x_j` with step `h·max(1, |x_j|)`.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let fp = f(&xp);
        xp[j] = x[j] - step;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    jac
}

/// Real roots of `Y_kk·E² + coupling·E − power` in `[-2, 2]`, found by a
/// uniform sign-change scan followed by bisection.
pub fn quadratic_root_scan(y_kk: f64, coupling: f64, power: f64) -> Vec<f64> {
    let g = |e: f64| (y_kk * e + coupling) * e - power;
    let n = 4096;
    let (lo, hi) = (-2.0, 2.0);
    let at = |k: usize| lo + (hi - lo) * k as f64 / n as f64;
    let mut roots = Vec::new();
    for k in 0..n {
        let (mut a, mut b) = (at(k), at(k + 1));
        let (mut ga, gb) = (g(a), g(b));
        if ga == 0.0 {
            roots.push(a);
            continue;
        }
        if ga * gb > 0.0 {
            // Double roots touch zero without a sign change; check the vertex.
            let v = -coupling / (2.0 * y_kk);
            if v > a && v < b && g(v).abs() <= 1e-14 * (1.0 + power.abs()) {
                roots.push(v);
            }
            continue;
        }
        if gb == 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let gm = g(mid);
            if gm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if (gm > 0.0) == (ga > 0.0) {
                a = mid;
                ga = gm;
            } else {
                b = mid;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if g(hi) == 0.0 {
        roots.push(hi);
    }
    roots
}

/// Root of the scan closest to 1 p.u.
pub fn scanned_feasible_root(y_kk: f64, coupling: f64, power: f64) -> Option<f64> {
    quadratic_root_scan(y_kk, coupling, power)
        .into_iter()
        .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
}

#[cfg(test)]
mod tests;
