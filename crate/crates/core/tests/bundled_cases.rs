mod common;

use acdc_pf::grid::{AcBusKind, ConverterMode, DcBusKind};
use acdc_pf::io::{case_to_toml, load_solution, parse_case, save_case, save_solution, solution_to_json};
use acdc_pf::oracle::{fixed_point_solve, OracleOptions};
use acdc_pf::solver::{solve, InitialGuess, PowerFlow, SolverOptions};
use common::*;

#[test]
fn microgrid_has_the_documented_roles() {
    let case = bundled("microgrid");
    assert_eq!(case.ac_buses.len(), 18);
    assert_eq!(case.dc_buses.len(), 8);
    assert_eq!(case.converters.len(), 4);
    assert!(matches!(case.ac_buses[case.ac_index(1).unwrap()].kind, AcBusKind::Slack { .. }));
    for id in 2..=14 {
        assert!(matches!(case.ac_buses[case.ac_index(id).unwrap()].kind, AcBusKind::Pq { .. }), "bus {id}");
    }
    let mut edc = Vec::new();
    let mut pac = Vec::new();
    for c in &case.converters {
        match c.mode {
            ConverterMode::EdcQac { .. } => edc.push((c.ac_bus, c.dc_bus)),
            ConverterMode::PacQac { .. } => pac.push((c.ac_bus, c.dc_bus)),
            ConverterMode::PacVac { .. } => panic!("unexpected mode"),
        }
    }
    edc.sort();
    pac.sort();
    assert_eq!(edc, [(15, 19), (18, 20)]);
    assert_eq!(pac, [(16, 21), (17, 22)]);
    assert!(matches!(case.dc_buses[case.dc_index(23).unwrap()].kind, DcBusKind::P { p } if p == 0.0));
    for id in 24..=26 {
        assert!(matches!(case.dc_buses[case.dc_index(id).unwrap()].kind, DcBusKind::P { .. }));
    }
    assert_eq!(PowerFlow::new(&case).unwrap().n_states(), 17 * 6 + 8);
}

#[test]
fn every_case_round_trips_through_the_file_format() {
    let dir = tempfile::tempdir().unwrap();
    for name in all_case_names() {
        let case = bundled(&name);
        let path = dir.path().join(format!("{name}.toml"));
        save_case(case.data(), &path).unwrap();
        let again = acdc_pf::io::load_case(&path).unwrap();
        assert_eq!(again.data(), case.data(), "{name}");
        assert_eq!(case_to_toml(again.data()).unwrap(), case_to_toml(case.data()).unwrap());
    }
}

#[test]
fn every_case_converges_from_flat_start() {
    for name in all_case_names() {
        let sol = solve(&bundled(&name), &SolverOptions::default()).unwrap();
        assert!(sol.converged, "{name}");
        assert!(sol.iterations <= 10, "{name}: {}", sol.iterations);
        assert!(sol.final_mismatch() < 1e-8);
    }
}

#[test]
fn two_bus_voltage_matches_closed_form() {
    // |E|⁴ − |E|² + (P·X)² = 0 for a lossless line and unity power factor load.
    let expected = 0.999_949_993_748_687_2;
    let case = bundled("ac_two_bus");
    let nr = solve(&case, &SolverOptions::default().with_tolerance(1e-12)).unwrap();
    let oracle = fixed_point_solve(&case, &OracleOptions::default()).unwrap();
    for p in 0..3 {
        assert!((nr.ac_voltages[1].phases[p].norm() - expected).abs() < 1e-12);
        assert!((oracle.ac_voltage[1][p].norm() - expected).abs() < 1e-12);
    }
}

#[test]
fn solved_microgrid_file_holds_dc_setpoints() {
    let eps = 1e-8;
    let case = bundled("microgrid");
    let sol = solve(&case, &SolverOptions::default().with_tolerance(eps)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("microgrid.json");
    save_solution(&sol, &path).unwrap();
    let back = load_solution(&path).unwrap();
    // Timings are not part of the file.
    let mut expected = sol.clone();
    expected.timings = Default::default();
    assert_eq!(back, expected);
    let at = |id| back.dc_voltages.iter().find(|v| v.id == id).unwrap().voltage;
    assert!((at(19) - 1.0).abs() <= eps);
    assert!((at(20) - 0.999).abs() <= eps);
}

#[test]
fn warm_start_from_a_solution_needs_one_evaluation() {
    let case = bundled("microgrid_unbalanced");
    let pf = PowerFlow::new(&case).unwrap();
    let first = pf.solve(&SolverOptions::default()).unwrap();
    let again = pf.solve(&SolverOptions::default().with_init(InitialGuess::Provided(first.state_vector()))).unwrap();
    assert!(again.converged);
    assert_eq!(again.iterations, 1);
}

#[test]
fn unconverged_solution_still_serialises() {
    let sol = solve(&bundled("microgrid"), &SolverOptions::default().with_max_iterations(1)).unwrap();
    assert!(!sol.converged);
    let json = solution_to_json(&sol).unwrap();
    assert!(json.contains("\"converged\": false"), "{}", &json[..200]);
}

#[test]
fn solve_is_deterministic() {
    for name in ["hybrid_negative_seq", "microgrid_unbalanced"] {
        let case = bundled(name);
        let a = solve(&case, &SolverOptions::default()).unwrap();
        let b = solve(&case, &SolverOptions::default()).unwrap();
        assert_eq!(solution_to_json(&a).unwrap(), solution_to_json(&b).unwrap());
    }
}

#[test]
fn converter_on_missing_dc_bus_is_named() {
    let text = std::fs::read_to_string(case_path("hybrid_balanced")).unwrap().replace("dc_bus = 10", "dc_bus = 77");
    let err = parse_case(&text).unwrap_err().to_string();
    assert!(err.contains("77"), "{err}");
}

#[test]
fn audit_agrees_with_reported_balances() {
    for name in SMALL_CASES {
        let case = bundled(name);
        let pf = PowerFlow::new(&case).unwrap();
        let sol = pf.solve(&SolverOptions::default()).unwrap();
        let (ac, dc) = pf.model().voltages(&sol.state_vector());
        let a = audit(&case, &ac, &dc);
        for (k, c) in sol.converters.iter().enumerate() {
            assert!((a.converter_balance[k] - c.balance_error).abs() < 1e-9, "{name}");
        }
        let slack: f64 = sol.slack.iter().flat_map(|s| s.power.iter().map(|p| p.re)).sum();
        let loads: f64 = case
            .ac_buses
            .iter()
            .map(|b| match &b.kind {
                AcBusKind::Pq { p, .. } | AcBusKind::Pv { p, .. } => p.iter().sum(),
                _ => 0.0,
            })
            .sum();
        let conv: f64 = sol.converters.iter().map(|c| c.p_ac).sum();
        let losses: f64 = sol.ac_branches.iter().map(|b| b.loss).sum();
        assert!((slack + loads - conv - losses).abs() < 1e-7, "{name}");
    }
}
