//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p acdc-pf --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use acdc_pf::converter::{converter_losses, filter_losses, switching_current, LossParams, ResistanceTable};
use acdc_pf::grid::{phase_to_sequence, ConverterMode, SequencePolicy};
use acdc_pf::oracle::{fixed_point_solve, scanned_feasible_root, OracleOptions};
use acdc_pf::residuals::{feasible_root, Model};
use acdc_pf::solver::{JacobianBuilder, PowerFlow, SolverOptions};
use acdc_pf::synthetic::radial_hybrid;
use acdc_pf::NetworkCase;
use common::*;
use num_complex::Complex64;
use rand::Rng;

/// Switching loss current for 2 µs of commutation per 100 µs period, N = 200, |I| = 1.
/// Frozen from `tools/loss_reference.py` (40 significant digits).
const SWITCHING_REFERENCE: f64 = 0.012_731_348_232_574_316;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn microgrid_convergence() -> Outcome {
    let case = bundled("microgrid");
    let t = Instant::now();
    let sol = acdc_pf::solver::solve(&case, &SolverOptions::default().with_tolerance(1e-6)).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let detail = format!(
        "converged={} iterations={} mismatch={:.2e} time={:.2} ms",
        sol.converged,
        sol.iterations,
        sol.final_mismatch(),
        elapsed.as_secs_f64() * 1e3
    );
    check(sol.converged && sol.iterations <= 6 && elapsed < Duration::from_secs(1), detail)
}

fn multi_converter_dc_control() -> Outcome {
    let eps = 1e-8;
    let case = bundled("microgrid");
    let pf = PowerFlow::new(&case).map_err(|e| e.to_string())?;
    let sol = pf.solve(&SolverOptions::default().with_tolerance(eps)).map_err(|e| e.to_string())?;
    if !sol.converged {
        return Err("two-controller case did not converge".into());
    }
    let mut worst_setpoint = 0.0f64;
    let mut controllers = 0;
    for (k, conv) in case.converters.iter().enumerate() {
        if let ConverterMode::EdcQac { e_dc, .. } = conv.mode {
            let (_, d) = case.converter_buses(k);
            worst_setpoint = worst_setpoint.max((sol.dc_voltages[d].voltage - e_dc).abs());
            controllers += 1;
        }
    }

    // Hand the second controller's converged power to a P_ac-Q_ac converter.
    let mut data = case.data().clone();
    let k = data.converters.iter().rposition(|c| matches!(c.mode, ConverterMode::EdcQac { .. })).unwrap();
    let report = &sol.converters[k];
    let ConverterMode::EdcQac { q_ac, .. } = data.converters[k].mode else { unreachable!() };
    data.converters[k].mode =
        ConverterMode::PacQac { p_pos: report.p_ac - report.loss, q_pos: q_ac, p_neg: 0.0, q_neg: 0.0 };
    let single = NetworkCase::new(data).map_err(|e| e.to_string())?;
    let sol1 = acdc_pf::solver::solve(&single, &SolverOptions::default().with_tolerance(eps)).map_err(|e| e.to_string())?;
    let ac_diff = sol
        .ac_voltages
        .iter()
        .zip(&sol1.ac_voltages)
        .flat_map(|(a, b)| (0..3).map(move |p| (a.phases[p] - b.phases[p]).norm()))
        .fold(0.0f64, f64::max);
    let detail = format!(
        "{controllers} DC voltage controllers, max setpoint error {worst_setpoint:.2e}; \
         single-controller variant converged={} with max AC difference {ac_diff:.2e}",
        sol1.converged
    );
    check(controllers >= 2 && worst_setpoint <= eps && sol1.converged && ac_diff <= 1e-6, detail)
}

fn oracle_equivalence() -> Outcome {
    let mut worst = (0.0f64, "");
    let mut failures = Vec::new();
    for name in SMALL_CASES {
        let case = bundled(name);
        let pf = PowerFlow::new(&case).map_err(|e| e.to_string())?;
        let nr = pf.solve(&SolverOptions::default().with_tolerance(1e-11)).map_err(|e| format!("{name}: {e}"))?;
        let oracle = fixed_point_solve(&case, &OracleOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let (ac, dc) = pf.model().voltages(&nr.state_vector());
        let diff = oracle.max_voltage_difference(&ac, &dc);
        if !(nr.converged && oracle.converged && diff <= 1e-8) {
            failures.push(format!("{name} ({diff:.2e})"));
        }
        if diff > worst.0 {
            worst = (diff, name);
        }
    }
    let detail = format!("{} cases, max difference {:.2e} p.u. ({})", SMALL_CASES.len(), worst.0, worst.1);
    check(failures.is_empty() && SMALL_CASES.len() >= 6, if failures.is_empty() { detail } else { failures.join(", ") })
}

fn conservation() -> Outcome {
    let eps = 1e-8;
    let mut worst = (0.0f64, String::new());
    for name in all_case_names() {
        let case = bundled(&name);
        let pf = PowerFlow::new(&case).map_err(|e| e.to_string())?;
        let sol = pf.solve(&SolverOptions::default().with_tolerance(eps)).map_err(|e| format!("{name}: {e}"))?;
        if !sol.converged {
            return Err(format!("{name} did not converge"));
        }
        let (ac, dc) = pf.model().voltages(&sol.state_vector());
        let a = audit(&case, &ac, &dc);
        let items = a
            .converter_balance
            .iter()
            .map(|v| (v.abs(), "converter"))
            .chain([(a.ac_balance.abs(), "AC grid"), (a.dc_balance.abs(), "DC grid"), (a.setpoint_error, "setpoint")]);
        for (v, what) in items {
            if v > worst.0 {
                worst = (v, format!("{name} {what}"));
            }
        }
    }
    check(worst.0 <= 10.0 * eps, format!("worst imbalance {:.2e} ({}), limit {:.0e}", worst.0, worst.1, 10.0 * eps))
}

fn sequence_invariants() -> Outcome {
    let eps = 1e-8;
    let mut balanced = 0.0f64;
    for name in BALANCED_CASES {
        let sol = acdc_pf::solver::solve(&bundled(name), &SolverOptions::default().with_tolerance(eps)).map_err(|e| e.to_string())?;
        for v in &sol.ac_voltages {
            balanced = balanced.max(v.sequences[0].norm()).max(v.sequences[2].norm());
        }
    }
    let mut terminal = 0.0f64;
    let mut terminals = 0;
    for name in ["hybrid_unbalanced", "hybrid_negative_seq", "microgrid_unbalanced"] {
        let case = bundled(name);
        let sol = acdc_pf::solver::solve(&case, &SolverOptions::default().with_tolerance(eps)).map_err(|e| e.to_string())?;
        for (k, conv) in case.converters.iter().enumerate() {
            let (l, _) = case.converter_buses(k);
            let e = phase_to_sequence(&nalgebra::Vector3::from(sol.ac_voltages[l].phases));
            terminal = terminal.max(e.zero.norm());
            if conv.sequence == SequencePolicy::PositiveOnly {
                terminal = terminal.max(e.negative.norm());
            }
            terminals += 1;
        }
    }
    check(
        balanced <= 1e-10 && terminal <= eps,
        format!("balanced cases max |E0|,|E-| {balanced:.2e}; {terminals} unbalanced converter terminals max {terminal:.2e}"),
    )
}

fn jacobian_correctness() -> Outcome {
    let mut worst = (0.0f64, String::new());
    let mut states = 0;
    for name in all_case_names() {
        let case = bundled(&name);
        let model = Model::new(&case).map_err(|e| e.to_string())?;
        let builder = JacobianBuilder::new(&model);
        let mut rng = rng(0x5eed ^ name.len() as u64);
        for _ in 0..10 {
            let x = random_state(&model, &mut rng, 0.05);
            let jac = builder.build(&model, &model.operating_point(&x));
            let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); x.len()];
            for &(r, c, v) in jac.entries() {
                cols[c].push((r, v));
            }
            let mut analytic = vec![0.0; x.len()];
            for (col, entries) in cols.iter().enumerate() {
                let h = 1e-7 * x.values[col].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp.values[col] += h;
                xm.values[col] -= h;
                let fp = model.residuals_at(&model.operating_point(&xp)).values;
                let fm = model.residuals_at(&model.operating_point(&xm)).values;
                analytic.iter_mut().for_each(|v| *v = 0.0);
                for &(r, v) in entries {
                    analytic[r] += v;
                }
                for row in 0..x.len() {
                    // Residuals are y* − F.
                    let fd = -(fp[row] - fm[row]) / (2.0 * h);
                    let rel = (analytic[row] - fd).abs() / fd.abs().max(1.0);
                    if rel > worst.0 {
                        worst = (rel, format!("{name}: {} / column {col}", model.labels()[row]));
                    }
                }
            }
            states += 1;
        }
    }
    check(worst.0 <= 1e-5, format!("{states} states, worst relative deviation {:.2e} ({})", worst.0, worst.1))
}

fn root_selection() -> Outcome {
    let mut rng = rng(2024);
    let mut worst = 0.0f64;
    let mut draws = 0;
    let mut wrong_root = 0;
    while draws < 1000 {
        let r1 = rng.random_range(-2.0..2.0f64);
        let r2 = rng.random_range(-2.0..2.0f64);
        if (r1 - r2).abs() < 1e-3 {
            continue;
        }
        let y = rng.random_range(0.5..200.0);
        // y·(E − r1)(E − r2) = y·E² + coupling·E − power
        let coupling = -y * (r1 + r2);
        let power = -y * r1 * r2;
        let Ok(root) = feasible_root(y, coupling, power) else {
            return Err(format!("no root for draw {draws}"));
        };
        let Some(scanned) = scanned_feasible_root(y, coupling, power) else {
            return Err(format!("scan found no root for draw {draws}"));
        };
        let nearer = if (r1 - 1.0).abs() <= (r2 - 1.0).abs() { r1 } else { r2 };
        if (root - nearer).abs() > 1e-9 {
            wrong_root += 1;
        }
        worst = worst.max((root - scanned).abs());
        draws += 1;
    }
    check(
        worst <= 1e-9 && wrong_root == 0,
        format!("{draws} draws, max |closed form − scan| {worst:.2e}, wrong root chosen {wrong_root} times"),
    )
}

fn loss_limits() -> Outcome {
    let zero = LossParams::lossless();
    let mut rng = rng(99);
    let mut exact_zero = true;
    for _ in 0..1000 {
        let i = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let l = converter_losses(i, rng.random_range(0.5..1.5), &zero);
        exact_zero &= l.s_loss == Complex64::new(0.0, 0.0) && l.i_sw == 0.0;
        exact_zero &= filter_losses(i, Complex64::new(0.0, rng.random_range(0.0..0.1))) == 0.0;
    }
    // A lossless converter in a full solve dissipates nothing.
    let mut data = bundled("hybrid_balanced").data().clone();
    for c in &mut data.converters {
        c.losses = LossParams::lossless();
        c.z_filter = Complex64::new(0.0, c.z_filter.im);
    }
    let case = NetworkCase::new(data).map_err(|e| e.to_string())?;
    let sol = acdc_pf::solver::solve(&case, &SolverOptions::default()).map_err(|e| e.to_string())?;
    exact_zero &= sol.converters.iter().all(|c| c.loss == 0.0 && c.filter_loss == 0.0);

    let params = LossParams::new(ResistanceTable::constant(0.0), 1e-6, 0.6e-6, 0.4e-6, 100e-6, 200.0).map_err(|e| e.to_string())?;
    let i_sw = switching_current(1.0, &params).map_err(|e| e.to_string())?;
    let s = converter_losses(Complex64::new(1.0, 0.0), 1.0, &params).s_loss.re;
    let err = (i_sw - SWITCHING_REFERENCE).abs().max((s - SWITCHING_REFERENCE).abs());
    check(
        exact_zero && err <= 1e-9,
        format!("zero parameters give exactly zero: {exact_zero}; switching current {i_sw:.12} (error {err:.1e})"),
    )
}

fn scaling() -> Outcome {
    let big = bundled("synthetic_1000");
    let sol = acdc_pf::solver::solve(&big, &SolverOptions::default()).map_err(|e| e.to_string())?;
    if !(sol.converged && sol.iterations <= 10) {
        return Err(format!("1000-bus case: converged={} iterations={}", sol.converged, sol.iterations));
    }
    let mut rows = Vec::new();
    for n in [50usize, 200, 1000] {
        let case = radial_hybrid(n, 7);
        let pf = PowerFlow::new(&case).map_err(|e| e.to_string())?;
        let mut best = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..5 {
            let s = pf.solve(&SolverOptions::default()).map_err(|e| e.to_string())?;
            let t = s.timings;
            let steps = (s.iterations.max(2) - 1) as f64;
            best = best.min((t.mismatch + t.jacobian + t.linear_solve).as_secs_f64() / steps);
            iterations = s.iterations;
        }
        let nnz = JacobianBuilder::new(pf.model()).build(pf.model(), &pf.model().operating_point(&pf.flat_start())).nnz();
        rows.push((n as f64, best, iterations, pf.n_states(), nnz));
    }
    let slope = (rows[2].1 / rows[0].1).ln() / (rows[2].0 / rows[0].0).ln();
    let nnz_per_state: Vec<f64> = rows.iter().map(|r| r.4 as f64 / r.3 as f64).collect();
    let sparse = nnz_per_state.iter().cloned().fold(0.0, f64::max) <= 2.0 * nnz_per_state.iter().cloned().fold(f64::INFINITY, f64::min);
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{} buses: {} states, {} it, {:.3} ms/it, nnz {}", r.0, r.3, r.2, r.1 * 1e3, r.4))
        .collect();
    check(
        slope < 2.0 && sparse,
        format!("bundled 1000-bus case {} iterations; {}; cost exponent {slope:.2}", sol.iterations, table.join("; ")),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("microgrid converges from flat start in <= 6 iterations at 1e-6, under 1 s", microgrid_convergence),
        ("two DC voltage controllers on one DC grid hold their setpoints", multi_converter_dc_control),
        ("Newton and fixed-point solutions agree within 1e-8 p.u.", oracle_equivalence),
        ("converter and grid power balances close within 10 eps", conservation),
        ("sequence components vanish where required", sequence_invariants),
        ("analytic Jacobian matches central differences within 1e-5", jacobian_correctness),
        ("DC root selection matches the bisection scan within 1e-9", root_selection),
        ("loss model limits", loss_limits),
        ("1000-bus case in <= 10 iterations, subquadratic cost growth", scaling),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}  [{detail}] ({secs:.2} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}  [{detail}] ({secs:.2} s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
