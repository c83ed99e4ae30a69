//! Compound admittance matrices.
//!
//! The AC matrix is stored as 3×3 phase blocks per (bus, bus) pair, the DC
//! matrix as scalar entries. Rows keep their blocks sorted by column so that
//! every product has a fixed summation order.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use super::sequence::{PhaseMatrix, PhaseVector};
use super::{AcBranch, AcBus, BusId, DcBranch, DcBus, NetworkCase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmittanceError {
    #[error("branch {from}-{to} references unknown bus {id}")]
    Topology { from: BusId, to: BusId, id: BusId },
    #[error("branch {from}-{to}: {reason}")]
    Data { from: BusId, to: BusId, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcAdmittance {
    rows: Vec<Vec<(usize, PhaseMatrix)>>,
}

impl AcAdmittance {
    pub fn n_buses(&self) -> usize {
        self.rows.len()
    }

    /// Nonzero blocks of bus row `i`, sorted by column bus.
    pub fn row(&self, i: usize) -> &[(usize, PhaseMatrix)] {
        &self.rows[i]
    }

    pub fn block(&self, i: usize, n: usize) -> Option<&PhaseMatrix> {
        let row = &self.rows[i];
        row.binary_search_by_key(&n, |e| e.0).ok().map(|k| &row[k].1)
    }

    /// Entry at ((bus i, phase φ), (bus n, phase ψ)).
    pub fn entry(&self, i: usize, phi: usize, n: usize, psi: usize) -> Complex64 {
        self.block(i, n).map_or(Complex64::new(0.0, 0.0), |b| b[(phi, psi)])
    }

    /// Injected phase currents `I = Y·E` for every bus.
    pub fn currents(&self, e: &[PhaseVector]) -> Vec<PhaseVector> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(PhaseVector::zeros(), |acc, (n, y)| acc + y * e[*n]))
            .collect()
    }

    /// Dense 3N×3N matrix with row `3·bus + phase`.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for (i, row) in self.rows.iter().enumerate() {
            for (k, y) in row {
                m.view_mut((3 * i, 3 * k), (3, 3)).copy_from(y);
            }
        }
        m
    }

    pub fn nnz_blocks(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcAdmittance {
    rows: Vec<Vec<(usize, f64)>>,
}

impl DcAdmittance {
    pub fn n_buses(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[(usize, f64)] {
        &self.rows[j]
    }

    pub fn entry(&self, j: usize, m: usize) -> f64 {
        let row = &self.rows[j];
        row.binary_search_by_key(&m, |e| e.0).map_or(0.0, |k| row[k].1)
    }

    pub fn currents(&self, e: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(0.0, |acc, (m, y)| acc + y * e[*m]))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (j, row) in self.rows.iter().enumerate() {
            for (k, y) in row {
                m[(j, *k)] = *y;
            }
        }
        m
    }
}

/// The AC (three-phase complex) and DC (real) bus admittance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundAdmittance {
    pub ac: AcAdmittance,
    pub dc: DcAdmittance,
}

impl CompoundAdmittance {
    pub fn build(case: &NetworkCase) -> Result<Self, AdmittanceError> {
        Ok(Self {
            ac: build_ac_admittance(&case.ac_buses, &case.ac_branches)?,
            dc: build_dc_admittance(&case.dc_buses, &case.dc_branches)?,
        })
    }
}

fn positions<I: Iterator<Item = BusId>>(ids: I) -> HashMap<BusId, usize> {
    ids.enumerate().map(|(k, id)| (id, k)).collect()
}

/// Series admittance `Z⁻¹` of a branch.
pub fn series_admittance(branch: &AcBranch) -> Result<PhaseMatrix, AdmittanceError> {
    let inv = branch.series.try_inverse().ok_or_else(|| AdmittanceError::Data {
        from: branch.from,
        to: branch.to,
        reason: "series impedance matrix is singular".into(),
    })?;
    if inv.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(AdmittanceError::Data {
            from: branch.from,
            to: branch.to,
            reason: "series impedance matrix is singular".into(),
        });
    }
    Ok(inv)
}

pub fn build_ac_admittance(buses: &[AcBus], branches: &[AcBranch]) -> Result<AcAdmittance, AdmittanceError> {
    let index = positions(buses.iter().map(|b| b.id));
    let mut rows: Vec<BTreeMap<usize, PhaseMatrix>> = vec![BTreeMap::new(); buses.len()];
    for br in branches {
        let lookup = |id| index.get(&id).copied().ok_or(AdmittanceError::Topology { from: br.from, to: br.to, id });
        let (f, t) = (lookup(br.from)?, lookup(br.to)?);
        let ys = series_admittance(br)?;
        let half = br.shunt * Complex64::new(0.5, 0.0);
        let mut add = |i: usize, k: usize, m: PhaseMatrix| {
            *rows[i].entry(k).or_insert_with(PhaseMatrix::zeros) += m;
        };
        add(f, f, ys + half);
        add(t, t, ys + half);
        add(f, t, -ys);
        add(t, f, -ys);
    }
    Ok(AcAdmittance {
        rows: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
    })
}

pub fn build_dc_admittance(buses: &[DcBus], branches: &[DcBranch]) -> Result<DcAdmittance, AdmittanceError> {
    let index = positions(buses.iter().map(|b| b.id));
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); buses.len()];
    for br in branches {
        if !(br.resistance > 0.0) {
            return Err(AdmittanceError::Data {
                from: br.from,
                to: br.to,
                reason: format!("resistance must be positive, got {}", br.resistance),
            });
        }
        let lookup = |id| index.get(&id).copied().ok_or(AdmittanceError::Topology { from: br.from, to: br.to, id });
        let (f, t) = (lookup(br.from)?, lookup(br.to)?);
        let g = 1.0 / br.resistance;
        *rows[f].entry(f).or_insert(0.0) += g;
        *rows[t].entry(t).or_insert(0.0) += g;
        *rows[f].entry(t).or_insert(0.0) -= g;
        *rows[t].entry(f).or_insert(0.0) -= g;
    }
    Ok(DcAdmittance {
        rows: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AcBusKind, DcBusKind};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ac_buses(n: u32) -> Vec<AcBus> {
        (1..=n).map(|id| AcBus { id, kind: AcBusKind::Pq { p: [0.0; 3], q: [0.0; 3] } }).collect()
    }

    fn dc_buses(n: u32) -> Vec<DcBus> {
        (1..=n).map(|id| DcBus { id, kind: DcBusKind::P { p: 0.0 } }).collect()
    }

    #[test]
    fn single_branch_stamp() {
        let y = build_ac_admittance(&ac_buses(2), &[AcBranch::uncoupled(1, 2, c(0.0, 0.1))]).unwrap();
        for p in 0..3 {
            assert!((y.entry(0, p, 0, p) - c(0.0, -10.0)).norm() < 1e-12);
            assert!((y.entry(0, p, 1, p) - c(0.0, 10.0)).norm() < 1e-12);
            assert!((y.entry(1, p, 0, p) - c(0.0, 10.0)).norm() < 1e-12);
            assert!((y.entry(1, p, 1, p) - c(0.0, -10.0)).norm() < 1e-12);
        }
        assert_eq!(y.entry(0, 0, 0, 1), c(0.0, 0.0));
    }

    #[test]
    fn no_branches_gives_zero() {
        let y = build_ac_admittance(&ac_buses(3), &[]).unwrap();
        assert!(y.to_dense().iter().all(|v| *v == c(0.0, 0.0)));
        let d = build_dc_admittance(&dc_buses(3), &[]).unwrap();
        assert!(d.to_dense().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ring_diagonal_twice_offdiagonal() {
        let z = c(0.02, 0.08);
        let br = [AcBranch::uncoupled(1, 2, z), AcBranch::uncoupled(2, 3, z), AcBranch::uncoupled(3, 1, z)];
        let y = build_ac_admittance(&ac_buses(3), &br).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                if i != k {
                    assert!((y.entry(i, 1, i, 1).norm() - 2.0 * y.entry(i, 1, k, 1).norm()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn coupled_branch_is_symmetric_with_shunt() {
        let mut br = AcBranch::coupled(1, 2, c(0.05, 0.2), c(0.01, 0.07));
        br.shunt = PhaseMatrix::from_diagonal_element(c(0.0, 0.02));
        let y = build_ac_admittance(&ac_buses(2), &[br.clone()]).unwrap().to_dense();
        assert!((&y - y.transpose()).norm() < 1e-12);
        // Sum over the two bus columns leaves only the half shunt.
        for p in 0..3 {
            let s: Complex64 = (0..6).map(|col| y[(p, col)]).sum();
            let expect: Complex64 = (0..3).map(|q| br.shunt[(p, q)] * 0.5).sum();
            assert!((s - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_and_dangling_rejected() {
        let br = AcBranch::uncoupled(1, 2, c(0.0, 0.0));
        assert!(matches!(build_ac_admittance(&ac_buses(2), &[br]), Err(AdmittanceError::Data { .. })));
        let br = AcBranch::uncoupled(1, 5, c(0.0, 0.1));
        assert!(matches!(build_ac_admittance(&ac_buses(2), &[br]), Err(AdmittanceError::Topology { id: 5, .. })));
    }

    #[test]
    fn dc_examples() {
        let y = build_dc_admittance(&dc_buses(2), &[DcBranch { from: 1, to: 2, resistance: 0.1 }]).unwrap();
        let d = y.to_dense();
        assert!((d[(0, 0)] - 10.0).abs() < 1e-12 && (d[(0, 1)] + 10.0).abs() < 1e-12);
        assert!((d[(1, 0)] + 10.0).abs() < 1e-12 && (d[(1, 1)] - 10.0).abs() < 1e-12);

        let par = [DcBranch { from: 1, to: 2, resistance: 0.2 }, DcBranch { from: 1, to: 2, resistance: 0.2 }];
        assert_eq!(build_dc_admittance(&dc_buses(2), &par).unwrap().to_dense(), d);

        let star: Vec<_> = (2..=4).map(|t| DcBranch { from: 1, to: t, resistance: 1.0 }).collect();
        let s = build_dc_admittance(&dc_buses(4), &star).unwrap();
        assert_eq!(s.entry(0, 0), 3.0);
        for j in 1..4 {
            assert_eq!(s.entry(j, j), 1.0);
        }

        let bad = [DcBranch { from: 1, to: 2, resistance: -0.1 }];
        assert!(matches!(build_dc_admittance(&dc_buses(2), &bad), Err(AdmittanceError::Data { .. })));
    }

    #[test]
    fn dc_rows_sum_to_zero_without_shunts() {
        let br = [
            DcBranch { from: 1, to: 2, resistance: 0.3 },
            DcBranch { from: 2, to: 3, resistance: 0.7 },
            DcBranch { from: 3, to: 1, resistance: 0.11 },
            DcBranch { from: 3, to: 4, resistance: 1.9 },
        ];
        let d = build_dc_admittance(&dc_buses(4), &br).unwrap().to_dense();
        assert!((&d - d.transpose()).norm() == 0.0);
        for j in 0..4 {
            assert!(d.row(j).sum().abs() <= 1e-12);
        }
    }
}
