use std::fmt;

use super::{AcBusKind, DcBusKind, NetworkCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    MissingSlack,
    MultipleSlack,
    NoDcVoltageSource,
    ConverterLink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn islands(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Checks the structural requirements of a solvable hybrid network.
///
/// Every AC island needs exactly one slack bus, every DC island needs a bus
/// that imposes its voltage (a V node or an `edc_qac` converter), and each
/// converter must link a converter-type AC bus with a converter-type DC bus.
pub fn validate_topology(case: &NetworkCase) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let ac_groups = islands(
        case.ac_buses.len(),
        case.ac_branches.iter().map(|b| (case.ac_index(b.from).unwrap(), case.ac_index(b.to).unwrap())),
    );
    for group in &ac_groups {
        let slacks: Vec<_> = group
            .iter()
            .filter(|&&i| matches!(case.ac_buses[i].kind, AcBusKind::Slack { .. }))
            .map(|&i| case.ac_buses[i].id)
            .collect();
        let ids: Vec<_> = group.iter().map(|&i| case.ac_buses[i].id).collect();
        match slacks.len() {
            1 => {}
            0 => out.push(Diagnostic {
                kind: DiagnosticKind::MissingSlack,
                message: format!("AC island {ids:?} has no slack bus"),
            }),
            _ => out.push(Diagnostic {
                kind: DiagnosticKind::MultipleSlack,
                message: format!("AC island {ids:?} has {} slack buses {slacks:?}", slacks.len()),
            }),
        }
    }

    let dc_groups = islands(
        case.dc_buses.len(),
        case.dc_branches.iter().map(|b| (case.dc_index(b.from).unwrap(), case.dc_index(b.to).unwrap())),
    );
    for group in &dc_groups {
        let has_source = group.iter().any(|&j| match case.dc_buses[j].kind {
            DcBusKind::V { .. } => true,
            DcBusKind::ConverterDc => case
                .converter_at_dc(j)
                .is_some_and(|k| case.converters[k].mode.controls_dc_voltage()),
            DcBusKind::P { .. } => false,
        });
        if !has_source {
            let ids: Vec<_> = group.iter().map(|&j| case.dc_buses[j].id).collect();
            out.push(Diagnostic {
                kind: DiagnosticKind::NoDcVoltageSource,
                message: format!("DC island {ids:?} has no DC voltage source (V node or edc_qac converter)"),
            });
        }
    }

    for (i, b) in case.ac_buses.iter().enumerate() {
        let is_conv = matches!(b.kind, AcBusKind::ConverterAc);
        match (is_conv, case.converter_at_ac(i)) {
            (true, None) => out.push(Diagnostic {
                kind: DiagnosticKind::ConverterLink,
                message: format!("AC bus {} is a converter bus but no converter uses it", b.id),
            }),
            (false, Some(k)) => out.push(Diagnostic {
                kind: DiagnosticKind::ConverterLink,
                message: format!("converter {} is attached to AC bus {} which is not a converter bus", case.converters[k].id, b.id),
            }),
            _ => {}
        }
    }
    for (j, b) in case.dc_buses.iter().enumerate() {
        let is_conv = matches!(b.kind, DcBusKind::ConverterDc);
        match (is_conv, case.converter_at_dc(j)) {
            (true, None) => out.push(Diagnostic {
                kind: DiagnosticKind::ConverterLink,
                message: format!("DC bus {} is a converter bus but no converter uses it", b.id),
            }),
            (false, Some(k)) => out.push(Diagnostic {
                kind: DiagnosticKind::ConverterLink,
                message: format!("converter {} is attached to DC bus {} which is not a converter bus", case.converters[k].id, b.id),
            }),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::LossParams;
    use crate::grid::*;
    use num_complex::Complex64;

    fn hybrid(mode: ConverterMode) -> CaseData {
        let z = Complex64::new(0.01, 0.05);
        CaseData {
            name: "t".into(),
            ac_buses: vec![
                AcBus { id: 1, kind: AcBusKind::Slack { v_mag: 1.0, angle: 0.0 } },
                AcBus { id: 2, kind: AcBusKind::ConverterAc },
            ],
            dc_buses: vec![DcBus { id: 3, kind: DcBusKind::ConverterDc }, DcBus { id: 4, kind: DcBusKind::P { p: -0.1 } }],
            ac_branches: vec![AcBranch::uncoupled(1, 2, z)],
            dc_branches: vec![DcBranch { from: 3, to: 4, resistance: 0.05 }],
            converters: vec![Converter {
                id: 1,
                ac_bus: 2,
                dc_bus: 3,
                mode,
                sequence: SequencePolicy::PositiveOnly,
                losses: LossParams::lossless(),
                z_filter: Complex64::new(0.0, 0.0),
            }],
            ..Default::default()
        }
    }

    #[test]
    fn accepts_edc_controlled_island() {
        let case = NetworkCase::new(hybrid(ConverterMode::EdcQac { e_dc: 1.0, q_ac: 0.0 })).unwrap();
        assert!(validate_topology(&case).is_empty());
    }

    #[test]
    fn dc_island_without_source() {
        let case = NetworkCase::new(hybrid(ConverterMode::PacQac { p_pos: 0.1, q_pos: 0.0, p_neg: 0.0, q_neg: 0.0 })).unwrap();
        let d = validate_topology(&case);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::NoDcVoltageSource);
        assert!(d[0].message.contains("no DC voltage source"));
    }

    #[test]
    fn two_slacks_in_one_island() {
        let mut data = hybrid(ConverterMode::EdcQac { e_dc: 1.0, q_ac: 0.0 });
        data.ac_buses.push(AcBus { id: 5, kind: AcBusKind::Slack { v_mag: 1.0, angle: 0.0 } });
        data.ac_branches.push(AcBranch::uncoupled(1, 5, Complex64::new(0.0, 0.1)));
        let d = validate_topology(&NetworkCase::new(data).unwrap());
        assert_eq!(d.iter().map(|d| d.kind).collect::<Vec<_>>(), vec![DiagnosticKind::MultipleSlack]);
    }

    #[test]
    fn island_without_slack_and_bad_link() {
        let mut data = hybrid(ConverterMode::EdcQac { e_dc: 1.0, q_ac: 0.0 });
        data.ac_buses[0].kind = AcBusKind::Pq { p: [0.0; 3], q: [0.0; 3] };
        data.dc_buses[0].kind = DcBusKind::P { p: 0.0 };
        let kinds: Vec<_> = validate_topology(&NetworkCase::new(data).unwrap()).iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::MissingSlack));
        assert!(kinds.contains(&DiagnosticKind::ConverterLink));
        assert!(kinds.contains(&DiagnosticKind::NoDcVoltageSource));
    }
}
