//! Random radial hybrid test networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::converter::{LossParams, ResistanceTable};
use crate::grid::{
    AcBranch, AcBus, AcBusKind, BusId, CaseData, Converter, ConverterMode, DcBranch, DcBus, DcBusKind, NetworkCase,
    SequencePolicy,
};
use num_complex::Complex64;

/// Builds a radial network with `n_buses` buses in total.
///
/// About a fifth of the buses form a DC feeder; the rest form an AC feeder
/// with unbalanced loads. One `edc_qac` converter links the feeder heads and
/// further `pac_qac` converters link random AC and DC buses.
pub fn radial_hybrid(n_buses: usize, seed: u64) -> NetworkCase {
    assert!(n_buses >= 8, "need at least 8 buses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dc = (n_buses / 5).max(3);
    let n_conv = (n_buses / 50).max(1);
    let n_ac = n_buses - n_dc;

    let losses = LossParams::new(
        ResistanceTable::new(vec![(0.0, 0.004), (2.0, 0.006)]).unwrap(),
        1e-6,
        1e-6,
        0.5e-6,
        1e-4,
        200.0,
    )
    .unwrap();
    // Scale loads so the feeder stays well inside its transfer limit.
    let load = 0.6 / n_ac as f64;

    let mut ac_buses = vec![AcBus { id: 1, kind: AcBusKind::Slack { v_mag: 1.0, angle: 0.0 } }];
    let mut ac_branches = Vec::new();
    // AC positions reserved for converters: 1 (head) and n_conv - 1 random others.
    let mut conv_ac: Vec<usize> = vec![1];
    while conv_ac.len() < n_conv {
        let k = rng.random_range(2..n_ac);
        if !conv_ac.contains(&k) {
            conv_ac.push(k);
        }
    }
    for k in 1..n_ac {
        let id = (k + 1) as BusId;
        let kind = if conv_ac.contains(&k) {
            AcBusKind::ConverterAc
        } else {
            let u = |rng: &mut ChaCha8Rng| rng.random_range(0.5..1.5);
            AcBusKind::Pq {
                p: [-load * u(&mut rng), -load * u(&mut rng), -load * u(&mut rng)],
                q: [-0.3 * load * u(&mut rng), -0.3 * load * u(&mut rng), -0.3 * load * u(&mut rng)],
            }
        };
        ac_buses.push(AcBus { id, kind });
        let parent = rng.random_range(0..k);
        let z = Complex64::new(rng.random_range(0.002..0.006), rng.random_range(0.002..0.008));
        ac_branches.push(AcBranch::coupled(ac_buses[parent].id, id, z, z * 0.2));
    }

    let dc_base = 100_000;
    let mut dc_buses = Vec::new();
    let mut dc_branches = Vec::new();
    for k in 0..n_dc {
        let id = (dc_base + k) as BusId;
        let kind = if k < n_conv {
            DcBusKind::ConverterDc
        } else {
            DcBusKind::P { p: -0.2 / n_dc as f64 * rng.random_range(0.5..1.5) }
        };
        dc_buses.push(DcBus { id, kind });
        if k > 0 {
            let parent = rng.random_range(0..k);
            dc_branches.push(DcBranch {
                from: (dc_base + parent) as BusId,
                to: id,
                resistance: rng.random_range(0.002..0.006),
            });
        }
    }

    let converters = (0..n_conv)
        .map(|k| Converter {
            id: (k + 1) as BusId,
            ac_bus: ac_buses[conv_ac[k]].id,
            dc_bus: dc_buses[k].id,
            mode: if k == 0 {
                ConverterMode::EdcQac { e_dc: 1.0, q_ac: 0.0 }
            } else {
                ConverterMode::PacQac { p_pos: -0.02, q_pos: 0.005, p_neg: 0.0, q_neg: 0.0 }
            },
            sequence: SequencePolicy::PositiveOnly,
            losses: losses.clone(),
            z_filter: Complex64::new(0.001, 0.01),
        })
        .collect();

    NetworkCase::new(CaseData {
        name: format!("synthetic radial hybrid, {n_buses} buses, seed {seed}"),
        ac_buses,
        dc_buses,
        ac_branches,
        dc_branches,
        converters,
        ..Default::default()
    })
    .expect("generated case is valid")
}
