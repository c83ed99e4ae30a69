#![allow(dead_code)]

use std::path::PathBuf;

use acdc_pf::converter::{converter_losses, filter_losses};
use acdc_pf::grid::{phase_to_sequence, AcBusKind, DcBusKind, PhaseMatrix, PhaseVector, SequencePolicy};
use acdc_pf::io::load_case;
use acdc_pf::residuals::{Model, StateVector};
use acdc_pf::NetworkCase;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bundled cases small enough for the fixed-point solver.
pub const SMALL_CASES: [&str; 9] = [
    "ac_two_bus",
    "ac_feeder",
    "dc_grid",
    "hybrid_balanced",
    "hybrid_unbalanced",
    "hybrid_negative_seq",
    "hybrid_pacvac",
    "microgrid",
    "microgrid_unbalanced",
];

pub const BALANCED_CASES: [&str; 4] = ["ac_two_bus", "dc_grid", "hybrid_balanced", "microgrid"];

pub fn cases_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

pub fn case_path(name: &str) -> PathBuf {
    cases_dir().join(format!("{name}.toml"))
}

pub fn bundled(name: &str) -> NetworkCase {
    load_case(case_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// All `*.toml` files in the case directory, sorted by name.
pub fn all_case_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(cases_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "toml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

/// Flat start plus a uniform perturbation of every state entry.
pub fn random_state(model: &Model<'_>, rng: &mut ChaCha8Rng, spread: f64) -> StateVector {
    let n = model.len();
    let (ac, dc) = flat_voltages(model);
    let mut x = model.state_from_voltages(&ac, &dc);
    debug_assert_eq!(x.len(), n);
    for v in &mut x.values {
        *v += rng.random_range(-spread..spread);
    }
    x
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn flat_voltages(model: &Model<'_>) -> (Vec<PhaseVector>, Vec<f64>) {
    let case = model.case();
    let a = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0);
    let ac = case.ac_buses.iter().map(|_| PhaseVector::new(Complex64::new(1.0, 0.0), a, a.conj())).collect();
    let dc = vec![1.0; case.dc_buses.len()];
    (ac, dc)
}

/// Power balances recomputed from branch data and bus voltages only.
#[derive(Debug, Clone)]
pub struct Audit {
    /// Per converter: `p_ac − losses − filter − p_dc`.
    pub converter_balance: Vec<f64>,
    /// Slack and setpoint injections minus line losses on the AC side.
    pub ac_balance: f64,
    /// The same on the DC side.
    pub dc_balance: f64,
    /// Largest setpoint violation at PQ, PV, P and V buses.
    pub setpoint_error: f64,
}

pub fn audit(case: &NetworkCase, ac: &[PhaseVector], dc: &[f64]) -> Audit {
    let nac = case.ac_buses.len();
    let ndc = case.dc_buses.len();
    let mut i_ac = vec![PhaseVector::zeros(); nac];
    let mut ac_losses = 0.0;
    for br in &case.ac_branches {
        let (f, t) = (case.ac_index(br.from).unwrap(), case.ac_index(br.to).unwrap());
        let y: PhaseMatrix = br.series.try_inverse().expect("series impedance is invertible");
        let half = br.shunt * Complex64::new(0.5, 0.0);
        let i_f = y * (ac[f] - ac[t]) + half * ac[f];
        let i_t = y * (ac[t] - ac[f]) + half * ac[t];
        i_ac[f] += i_f;
        i_ac[t] += i_t;
        ac_losses += (0..3).map(|p| (ac[f][p] * i_f[p].conj() + ac[t][p] * i_t[p].conj()).re).sum::<f64>();
    }
    let mut i_dc = vec![0.0; ndc];
    let mut dc_losses = 0.0;
    for br in &case.dc_branches {
        let (f, t) = (case.dc_index(br.from).unwrap(), case.dc_index(br.to).unwrap());
        let i = (dc[f] - dc[t]) / br.resistance;
        i_dc[f] += i;
        i_dc[t] -= i;
        dc_losses += i * i * br.resistance;
    }
    let s_bus = |b: usize| -> [Complex64; 3] { std::array::from_fn(|p| ac[b][p] * i_ac[b][p].conj()) };

    let mut setpoint_error = 0.0f64;
    let mut ac_injection = 0.0;
    for (b, bus) in case.ac_buses.iter().enumerate() {
        let s = s_bus(b);
        match &bus.kind {
            AcBusKind::Slack { .. } => ac_injection += s.iter().map(|v| v.re).sum::<f64>(),
            AcBusKind::Pq { p, q } => {
                for ph in 0..3 {
                    setpoint_error = setpoint_error.max((s[ph].re - p[ph]).abs()).max((s[ph].im - q[ph]).abs());
                }
                ac_injection += p.iter().sum::<f64>();
            }
            AcBusKind::Pv { p, v_mag } => {
                for ph in 0..3 {
                    setpoint_error = setpoint_error.max((s[ph].re - p[ph]).abs()).max((ac[b][ph].norm() - v_mag).abs());
                }
                ac_injection += p.iter().sum::<f64>();
            }
            AcBusKind::ConverterAc => {}
        }
    }
    let mut dc_injection = 0.0;
    for (j, bus) in case.dc_buses.iter().enumerate() {
        let p = dc[j] * i_dc[j];
        match bus.kind {
            DcBusKind::P { p: target } => {
                setpoint_error = setpoint_error.max((p - target).abs());
                dc_injection += target;
            }
            DcBusKind::V { v } => {
                setpoint_error = setpoint_error.max((dc[j] - v).abs());
                dc_injection += p;
            }
            DcBusKind::ConverterDc => {}
        }
    }

    let converter_balance = (0..case.converters.len())
        .map(|k| {
            let conv = &case.converters[k];
            let (l, d) = case.converter_buses(k);
            let s = s_bus(l);
            // Injected into the AC grid, so AC→DC power is its negative.
            let p_ac = -s.iter().map(|v| v.re).sum::<f64>();
            let p_dc = dc[d] * i_dc[d];
            ac_injection -= p_ac;
            dc_injection += p_dc;
            let i_seq = phase_to_sequence(&i_ac[l]);
            let mut loss = 3.0 * converter_losses(i_seq.positive, dc[d], &conv.losses).s_loss.re;
            let mut filter = 3.0 * filter_losses(i_seq.positive, conv.z_filter);
            if conv.sequence == SequencePolicy::WithNegative {
                let b = i_seq.negative.norm();
                loss += 3.0 * conv.losses.r_eq().eval(b) * b * b;
                filter += 3.0 * filter_losses(i_seq.negative, conv.z_filter);
            }
            p_ac - loss - filter - p_dc
        })
        .collect();

    Audit {
        converter_balance,
        ac_balance: ac_injection - ac_losses,
        dc_balance: dc_injection - dc_losses,
        setpoint_error,
    }
}
