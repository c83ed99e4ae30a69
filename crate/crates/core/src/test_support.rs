use num_complex::Complex64;

use crate::converter::{LossParams, ResistanceTable};
use crate::grid::*;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn lossy() -> LossParams {
    LossParams::new(
        ResistanceTable::new(vec![(0.0, 0.004), (1.0, 0.006)]).unwrap(),
        1e-6,
        1.2e-6,
        0.4e-6,
        1e-4,
        200.0,
    )
    .unwrap()
}

/// Slack 1 - PQ 2 - converter 3 on AC; converter DC 10 - P 11 on DC.
pub fn small_hybrid(mode: ConverterMode, sequence: SequencePolicy) -> NetworkCase {
    let z = c(0.02, 0.04);
    NetworkCase::new(CaseData {
        name: "small hybrid".into(),
        ac_buses: vec![
            AcBus { id: 1, kind: AcBusKind::Slack { v_mag: 1.0, angle: 0.0 } },
            AcBus { id: 2, kind: AcBusKind::Pq { p: [-0.1, -0.12, -0.08], q: [-0.03, -0.02, -0.04] } },
            AcBus { id: 3, kind: AcBusKind::ConverterAc },
        ],
        dc_buses: vec![
            DcBus { id: 10, kind: DcBusKind::ConverterDc },
            DcBus { id: 11, kind: DcBusKind::P { p: -0.2 } },
        ],
        ac_branches: vec![AcBranch::coupled(1, 2, z, c(0.005, 0.01)), AcBranch::uncoupled(2, 3, z)],
        dc_branches: vec![DcBranch { from: 10, to: 11, resistance: 0.03 }],
        converters: vec![Converter {
            id: 1,
            ac_bus: 3,
            dc_bus: 10,
            mode,
            sequence,
            losses: lossy(),
            z_filter: c(0.005, 0.05),
        }],
        ..Default::default()
    })
    .unwrap()
}

/// Same as [`small_hybrid`] with an extra DC V node so that power-controlled
/// converters have a DC voltage reference.
pub fn small_hybrid_with_dc_source(mode: ConverterMode, sequence: SequencePolicy) -> NetworkCase {
    let mut data = small_hybrid(mode, sequence).into_data();
    data.dc_buses.push(DcBus { id: 12, kind: DcBusKind::V { v: 1.0 } });
    data.dc_branches.push(DcBranch { from: 11, to: 12, resistance: 0.02 });
    NetworkCase::new(data).unwrap()
}
