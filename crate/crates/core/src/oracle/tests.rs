use super::*;
use crate::grid::{ConverterMode, SequencePolicy};
use crate::test_support::*;

#[test]
fn fd_jacobian_of_known_map() {
    let f = |x: &[f64]| vec![x[0] * x[1], x[0].sin() + x[1] * x[1] * x[1]];
    let j = fd_jacobian(f, &[0.3, 2.0], 1e-6);
    assert!((j[(0, 0)] - 2.0).abs() < 1e-9);
    assert!((j[(0, 1)] - 0.3).abs() < 1e-9);
    assert!((j[(1, 0)] - 0.3f64.cos()).abs() < 1e-9);
    assert!((j[(1, 1)] - 12.0).abs() < 1e-8);
}

#[test]
fn root_scan_finds_both_roots() {
    let roots = quadratic_root_scan(10.0, -9.5, 0.5);
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + 0.05).abs() < 1e-14);
    assert!((roots[1] - 1.0).abs() < 1e-14);
    assert!((scanned_feasible_root(10.0, -9.5, 0.5).unwrap() - 1.0).abs() < 1e-14);
    assert!(quadratic_root_scan(10.0, -10.0, -3.0).is_empty());
}

#[test]
fn fixed_point_reaches_tolerance_in_every_mode() {
    let cases = [
        small_hybrid(ConverterMode::EdcQac { e_dc: 1.02, q_ac: 0.03 }, SequencePolicy::PositiveOnly),
        small_hybrid_with_dc_source(
            ConverterMode::PacQac { p_pos: 0.15, q_pos: 0.02, p_neg: -0.001, q_neg: -0.002 },
            SequencePolicy::WithNegative,
        ),
        small_hybrid_with_dc_source(ConverterMode::PacVac { p_pos: -0.1, v_ac: 1.01 }, SequencePolicy::PositiveOnly),
    ];
    for case in &cases {
        let sol = fixed_point_solve(case, &OracleOptions::default()).unwrap();
        assert!(sol.converged, "{}: {} after {} sweeps", case.name, sol.mismatch, sol.sweeps);
        assert!(sol.mismatch <= 1e-12);
    }
}
