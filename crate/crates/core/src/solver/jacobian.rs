//! Analytic Jacobian `∂F/∂x` of the mismatch functions.

use num_complex::Complex64;

use crate::grid::sequence::forward_matrix;
use crate::grid::{ConverterMode, PhaseMatrix, SequencePolicy};
use crate::residuals::{Equation, EquationKind, Model, OperatingPoint, Site};

use super::linear::SparseMatrix;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Converter sequence sensitivities that do not depend on the state.
#[derive(Debug, Clone)]
struct ConverterStencil {
    /// `(AC bus position, W)` where `W[s][ψ] = Σ_φ T[s][φ]·Y[lφ][nψ]`.
    w: Vec<(usize, PhaseMatrix)>,
}

/// Builds the Jacobian for one [`Model`]; the admittance-dependent parts are
/// computed once.
#[derive(Debug, Clone)]
pub struct JacobianBuilder {
    t: PhaseMatrix,
    stencils: Vec<ConverterStencil>,
    conv_rows: Vec<Vec<(EquationKind, usize)>>,
}

/// First-order change of the converter quantities along one state direction.
#[derive(Debug, Clone, Copy, Default)]
struct Delta {
    e_pos: Complex64,
    e_neg: Complex64,
    e_zero: Complex64,
    i_pos: Complex64,
    i_neg: Complex64,
    e_dc: f64,
    p_dc: f64,
}

impl JacobianBuilder {
    pub fn new(model: &Model<'_>) -> Self {
        let case = model.case();
        let t = forward_matrix();
        let y = &model.admittance().ac;
        let stencils = (0..case.converters.len())
            .map(|k| {
                let (l, _) = case.converter_buses(k);
                let w = y.row(l).iter().map(|(n, block)| (*n, t * block)).collect();
                ConverterStencil { w }
            })
            .collect();
        let mut conv_rows = vec![Vec::new(); case.converters.len()];
        for (r, eq) in model.equations().iter().enumerate() {
            if let Site::Converter { index } = eq.site {
                conv_rows[index].push((eq.kind, r));
            }
        }
        Self { t, stencils, conv_rows }
    }

    pub fn build(&self, model: &Model<'_>, op: &OperatingPoint) -> SparseMatrix {
        let n = model.len();
        let mut m = SparseMatrix::new(n);
        for (r, eq) in model.equations().iter().enumerate() {
            match eq.site {
                Site::AcPhase { .. } | Site::Dc { .. } => self.bus_row(model, op, r, eq, &mut m),
                Site::Converter { .. } => {}
            }
        }
        for k in 0..model.case().converters.len() {
            self.converter_rows(model, op, k, &mut m);
        }
        m
    }

    fn bus_row(&self, model: &Model<'_>, op: &OperatingPoint, r: usize, eq: &Equation, m: &mut SparseMatrix) {
        let lay = model.layout();
        match (eq.kind, eq.site) {
            (EquationKind::ActivePower | EquationKind::ReactivePower, Site::AcPhase { bus, phase }) => {
                let take = |z: Complex64| if eq.kind == EquationKind::ActivePower { z.re } else { z.im };
                let e = op.ac_voltage[bus][phase];
                let i_conj = op.ac_current[bus][phase].conj();
                for (nb, block) in model.admittance().ac.row(bus) {
                    for psi in 0..3 {
                        let Some(re) = lay.re_col(*nb, psi) else { continue };
                        let im = lay.im_col(*nb, psi).unwrap();
                        let y = block[(phase, psi)].conj();
                        let own = *nb == bus && psi == phase;
                        let d_re = e * y + if own { i_conj } else { Complex64::default() };
                        let d_im = -J * e * y + if own { J * i_conj } else { Complex64::default() };
                        m.add(r, re, take(d_re));
                        m.add(r, im, take(d_im));
                    }
                }
            }
            (EquationKind::VoltageMagnitude, Site::AcPhase { bus, phase }) => {
                let e = op.ac_voltage[bus][phase];
                m.add(r, lay.re_col(bus, phase).unwrap(), 2.0 * e.re);
                m.add(r, lay.im_col(bus, phase).unwrap(), 2.0 * e.im);
            }
            (EquationKind::DcVoltage, Site::Dc { bus }) => m.add(r, lay.dc_col(bus), 1.0),
            (EquationKind::DcPower, Site::Dc { bus }) => {
                for &(nb, g) in model.admittance().dc.row(bus) {
                    let own = if nb == bus { op.dc_current[bus] } else { 0.0 };
                    m.add(r, lay.dc_col(nb), op.dc_voltage[bus] * g + own);
                }
            }
            (kind, site) => unreachable!("{kind:?} at {site:?}"),
        }
    }

    fn converter_rows(&self, model: &Model<'_>, op: &OperatingPoint, k: usize, m: &mut SparseMatrix) {
        let case = model.case();
        let conv = &case.converters[k];
        let (l, d) = case.converter_buses(k);
        let lay = model.layout();
        let term = &op.converters[k];
        let rows = &self.conv_rows[k];
        let e_dc = op.dc_voltage[d];
        let params = &conv.losses;
        let ksw = params.switching_coefficient();
        let rf = conv.z_filter.re;
        let with_neg = conv.sequence == SequencePolicy::WithNegative;
        let a = term.i_seq.positive.norm();
        let b = term.i_seq.negative.norm();
        let r_a = params.r_eq().eval(a);
        let r_b = params.r_eq().eval(b);
        let slope_a = params.r_eq().slope(a);
        let slope_b = params.r_eq().slope(b);
        let edc_mode = matches!(conv.mode, ConverterMode::EdcQac { .. });

        let d_abs = |i: Complex64, mag: f64, di: Complex64| if mag > 0.0 { (i.conj() * di).re / mag } else { 0.0 };

        let value = |kind: EquationKind, dl: &Delta| -> f64 {
            let ds_pos = -3.0 * (dl.e_pos * term.i_seq.positive.conj() + term.e_seq.positive * dl.i_pos.conj());
            let ds_neg = -3.0 * (dl.e_neg * term.i_seq.negative.conj() + term.e_seq.negative * dl.i_neg.conj());
            let da = d_abs(term.i_seq.positive, a, dl.i_pos);
            let db = d_abs(term.i_seq.negative, b, dl.i_neg);
            let dl_pos = 3.0 * ((slope_a * a * a + 2.0 * r_a * a + ksw * e_dc) * da + ksw * a * dl.e_dc);
            let dfil_pos = 6.0 * rf * a * da;
            let (dl_neg, dfil_neg) = if with_neg {
                (3.0 * (slope_b * b * b + 2.0 * r_b * b) * db, 6.0 * rf * b * db)
            } else {
                (0.0, 0.0)
            };
            match kind {
                EquationKind::PositiveActive if edc_mode => ds_pos.re - dl_pos - dfil_pos - dl.p_dc,
                EquationKind::PositiveActive => ds_pos.re - dl_pos,
                EquationKind::PositiveReactive => ds_pos.im,
                EquationKind::PositiveMagnitude => 2.0 * (term.e_seq.positive.conj() * dl.e_pos).re,
                EquationKind::NegativeActive => ds_neg.re - dl_neg,
                EquationKind::NegativeReactive => ds_neg.im,
                EquationKind::ZeroSequenceRe => dl.e_zero.re,
                EquationKind::ZeroSequenceIm => dl.e_zero.im,
                EquationKind::NegativeSequenceRe => dl.e_neg.re,
                EquationKind::NegativeSequenceIm => dl.e_neg.im,
                EquationKind::NegativeCurrentRe => dl.i_neg.re,
                EquationKind::NegativeCurrentIm => dl.i_neg.im,
                EquationKind::ConverterDcPower => dl.p_dc + dfil_pos + dfil_neg,
                other => unreachable!("{other:?}"),
            }
        };

        for (nb, w) in &self.stencils[k].w {
            for psi in 0..3 {
                let Some(re) = lay.re_col(*nb, psi) else { continue };
                let im = lay.im_col(*nb, psi).unwrap();
                let te = |s: usize| if *nb == l { self.t[(s, psi)] } else { Complex64::default() };
                let dir = Delta {
                    e_zero: te(0),
                    e_pos: te(1),
                    e_neg: te(2),
                    i_pos: w[(1, psi)],
                    i_neg: w[(2, psi)],
                    ..Default::default()
                };
                let dir_im = Delta {
                    e_zero: J * dir.e_zero,
                    e_pos: J * dir.e_pos,
                    e_neg: J * dir.e_neg,
                    i_pos: J * dir.i_pos,
                    i_neg: J * dir.i_neg,
                    ..Default::default()
                };
                for &(kind, r) in rows {
                    m.add(r, re, value(kind, &dir));
                    m.add(r, im, value(kind, &dir_im));
                }
            }
        }

        for &(nb, g) in model.admittance().dc.row(d) {
            let own = nb == d;
            let dir = Delta {
                e_dc: if own { 1.0 } else { 0.0 },
                p_dc: e_dc * g + if own { op.dc_current[d] } else { 0.0 },
                ..Default::default()
            };
            for &(kind, r) in rows {
                let v = value(kind, &dir);
                if v != 0.0 {
                    m.add(r, lay.dc_col(nb), v);
                }
            }
        }
    }
}
