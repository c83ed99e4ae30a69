//! Interfacing converter loss model.
//!
//! Conduction losses are an AC-side series voltage `E_c = R_eq(|I|)·I`,
//! switching losses a DC-side current source proportional to `|I|`, and the
//! RL filter dissipates `Re{Z_filter}·|I|²`. All functions here work per
//! converter leg (one phase); the network model scales them to three phases.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("switching ratio N must exceed 1, got {0}")]
    SwitchingRatio(f64),
    #[error("switching period must be positive, got {0}")]
    SwitchingPeriod(f64),
    #[error("commutation time {name} must be non-negative, got {value}")]
    NegativeTime { name: &'static str, value: f64 },
    #[error("invalid R_eq table: {0}")]
    ResistanceTable(String),
}

/// Piecewise-linear `|I| → R_eq` table with flat extrapolation on both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceTable {
    points: Vec<(f64, f64)>,
}

impl ResistanceTable {
    pub fn constant(r: f64) -> Self {
        Self { points: vec![(0.0, r)] }
    }

    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, LossError> {
        if points.is_empty() {
            return Err(LossError::ResistanceTable("table is empty".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(LossError::ResistanceTable(format!(
                    "current breakpoints must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(i, r)) = points.iter().find(|(i, r)| !i.is_finite() || !r.is_finite() || *r < 0.0 || *i < 0.0) {
            return Err(LossError::ResistanceTable(format!("entry ({i}, {r}) is not a non-negative finite pair")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn segment(&self, current: f64) -> Option<usize> {
        // index k such that points[k].0 <= current < points[k+1].0
        if !(current >= self.points[0].0) || current >= self.points[self.points.len() - 1].0 {
            return None;
        }
        Some(self.points.partition_point(|p| p.0 <= current) - 1)
    }

    pub fn eval(&self, current: f64) -> f64 {
        match self.segment(current) {
            Some(k) => {
                let (i0, r0) = self.points[k];
                let (i1, r1) = self.points[k + 1];
                r0 + (r1 - r0) * (current - i0) / (i1 - i0)
            }
            None if current < self.points[0].0 => self.points[0].1,
            None => self.points[self.points.len() - 1].1,
        }
    }

    /// d R_eq / d|I| (right derivative at breakpoints, zero outside the table).
    pub fn slope(&self, current: f64) -> f64 {
        match self.segment(current) {
            Some(k) => {
                let (i0, r0) = self.points[k];
                let (i1, r1) = self.points[k + 1];
                (r1 - r0) / (i1 - i0)
            }
            None => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.points.iter().all(|p| p.1 == 0.0)
    }
}

/// IGBT converter loss parameters. Times are in seconds, `R_eq` in p.u.
#[derive(Debug, Clone, PartialEq)]
pub struct LossParams {
    r_eq: ResistanceTable,
    t_on: f64,
    t_off: f64,
    t_rec: f64,
    t_s: f64,
    n_ratio: f64,
}

impl LossParams {
    pub fn new(r_eq: ResistanceTable, t_on: f64, t_off: f64, t_rec: f64, t_s: f64, n_ratio: f64) -> Result<Self, LossError> {
        for (name, value) in [("T_ON", t_on), ("T_OFF", t_off), ("T_REC", t_rec)] {
            if !(value >= 0.0) {
                return Err(LossError::NegativeTime { name, value });
            }
        }
        if !(t_s > 0.0) {
            return Err(LossError::SwitchingPeriod(t_s));
        }
        if !(n_ratio > 1.0) {
            return Err(LossError::SwitchingRatio(n_ratio));
        }
        Ok(Self { r_eq, t_on, t_off, t_rec, t_s, n_ratio })
    }

    /// No conduction or switching losses.
    pub fn lossless() -> Self {
        Self {
            r_eq: ResistanceTable::constant(0.0),
            t_on: 0.0,
            t_off: 0.0,
            t_rec: 0.0,
            t_s: 1e-4,
            n_ratio: 200.0,
        }
    }

    pub fn r_eq(&self) -> &ResistanceTable {
        &self.r_eq
    }
    pub fn t_on(&self) -> f64 {
        self.t_on
    }
    pub fn t_off(&self) -> f64 {
        self.t_off
    }
    pub fn t_rec(&self) -> f64 {
        self.t_rec
    }
    pub fn t_s(&self) -> f64 {
        self.t_s
    }
    pub fn n_ratio(&self) -> f64 {
        self.n_ratio
    }

    /// `I_sw / |I|`.
    pub fn switching_coefficient(&self) -> f64 {
        let n = self.n_ratio;
        2.0 * (self.t_on + self.t_off + self.t_rec) / self.t_s / n / (PI / n).tan()
    }
}

/// Per-leg loss quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Conduction plus switching losses.
    pub s_loss: Complex64,
    /// Real power dissipated in the RL filter.
    pub p_filter: f64,
    /// Conduction voltage drop phasor.
    pub e_c: Complex64,
    /// DC-side switching loss current.
    pub i_sw: f64,
}

impl LossBreakdown {
    pub fn p_total(&self) -> f64 {
        self.s_loss.re + self.p_filter
    }
}

pub fn conduction_voltage(i_ac: Complex64, params: &LossParams) -> Complex64 {
    i_ac * params.r_eq.eval(i_ac.norm())
}

pub fn switching_current(i_mag: f64, params: &LossParams) -> Result<f64, LossError> {
    if !(params.n_ratio > 1.0) {
        return Err(LossError::SwitchingRatio(params.n_ratio));
    }
    Ok(params.switching_coefficient() * i_mag)
}

/// Conduction and switching losses for AC terminal current `i_ac` and DC voltage `e_dc`.
/// `p_filter` is left at zero; see [`filter_losses`].
pub fn converter_losses(i_ac: Complex64, e_dc: f64, params: &LossParams) -> LossBreakdown {
    let e_c = conduction_voltage(i_ac, params);
    let i_sw = params.switching_coefficient() * i_ac.norm();
    LossBreakdown {
        s_loss: e_c * i_ac.conj() + i_sw * e_dc,
        p_filter: 0.0,
        e_c,
        i_sw,
    }
}

pub fn filter_losses(i_ac: Complex64, z_filter: Complex64) -> f64 {
    z_filter.re * i_ac.norm_sqr()
}
