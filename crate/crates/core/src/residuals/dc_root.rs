//! Closed-form DC voltage of a DC-voltage-controlling converter.
//!
//! Solving the DC node power balance `Y_kk·E² + (Σ_{m≠k} Y_km·E_m)·E − P = 0`
//! for `E` gives two roots: one near 1 p.u. and one near 0 p.u. Only the
//! former is an operating point.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcRootError {
    #[error("self conductance must be positive, got {0}")]
    SelfConductance(f64),
    #[error("no real DC voltage: power {power} exceeds the DC transfer capability (discriminant {discriminant})")]
    Infeasible { power: f64, discriminant: f64 },
}

/// Both real roots of `Y_kk·E² + coupling·E − power = 0`, in ascending order.
pub fn dc_roots(y_kk: f64, coupling: f64, power: f64) -> Result<(f64, f64), DcRootError> {
    if !(y_kk > 0.0) {
        return Err(DcRootError::SelfConductance(y_kk));
    }
    let (a, b, c) = (y_kk, coupling, -power);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(DcRootError::Infeasible { power, discriminant: disc });
    }
    let sq = disc.sqrt();
    // Cancellation-free pair of roots.
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Ok(if r1 <= r2 { (r1, r2) } else { (r2, r1) })
}

/// The root nearer to 1 p.u.
pub fn feasible_root(y_kk: f64, coupling: f64, power: f64) -> Result<f64, DcRootError> {
    let (lo, hi) = dc_roots(y_kk, coupling, power)?;
    Ok(if (hi - 1.0).abs() <= (lo - 1.0).abs() { hi } else { lo })
}
