//! Closed-form nulling beamformers for a single polarimetric antenna.
//!
//! Two node layouts have explicit solutions:
//!
//! * `(ex, ey, mx, my)` cancelling one link. Each 2×2 polarization block
//!   of the link channel is `w wᵀ` with `w = (sin φ, −cos φ)`, so the
//!   rotated-dipole combination `(cos φ, sin φ)` on both the electric and
//!   the magnetic pair is annihilated.
//! * all six components cancelling two links at angles `φa`, `φb`. The
//!   first column lives on `(ex, ey, mz)` and annihilates both horizontal
//!   rows; the second lives on `(ez, mx, my)` and annihilates both
//!   vertical rows. The `mz` entry of the first column must be
//!   `−sin(φa − φb)`: with `+sin(φa − φb)` the horizontal row at `φa`
//!   evaluates to `−2 sin(φa − φb)` instead of zero.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{real_matrix, CMatrix};

/// Treats `|sin(φa − φb)|` below this as coincident directions.
const DIRECTION_TOL: f64 = 1e-12;

/// Precoder for `(ex, ey, mx, my)` that cancels the link leaving at `phi`.
pub fn closed_form_tx_single(phi: f64) -> CMatrix {
    let (s, c) = phi.sin_cos();
    real_matrix(4, 2, &[c, 0.0, s, 0.0, 0.0, c, 0.0, s])
}

/// Combiner for `(ex, ey, mx, my)` that cancels the link arriving at `phi`.
/// The channel is reciprocal in form, so this is the transmit solution.
pub fn closed_form_rx_single(phi: f64) -> CMatrix {
    closed_form_tx_single(phi)
}

/// Unnormalized dual-null matrix (6×2, full component order).
pub fn dual_null_unnormalized(phi_a: f64, phi_b: f64) -> CMatrix {
    let (sa, ca) = phi_a.sin_cos();
    let (sb, cb) = phi_b.sin_cos();
    let d = (phi_a - phi_b).sin();
    #[rustfmt::skip]
    let data = [
        ca - cb, 0.0,
        sa - sb, 0.0,
        0.0,     d,
        0.0,     ca - cb,
        0.0,     sa - sb,
        -d,      0.0,
    ];
    real_matrix(6, 2, &data)
}

/// Scalar `1/√(1 + sin²(φa − φb))` that accompanies the dual-null matrix
/// as its usual scale factor. It does not give unit-norm columns.
pub fn reference_dual_normalization(phi_a: f64, phi_b: f64) -> f64 {
    1.0 / (1.0 + (phi_a - phi_b).sin().powi(2)).sqrt()
}

/// Euclidean norm shared by both columns of [`dual_null_unnormalized`]:
/// `√(2 − 2cos(φa − φb) + sin²(φa − φb))`.
pub fn dual_column_norm(phi_a: f64, phi_b: f64) -> f64 {
    let d = phi_a - phi_b;
    (2.0 - 2.0 * d.cos() + d.sin().powi(2)).sqrt()
}

/// Precoder using all six components that cancels the links leaving at
/// `phi_ij` and `phi_ik`; columns have unit norm and are orthogonal.
pub fn closed_form_tx_dual(phi_ij: f64, phi_ik: f64) -> Result<CMatrix> {
    if (phi_ij - phi_ik).sin().abs() < DIRECTION_TOL {
        return Err(Error::DegenerateDirections {
            a: phi_ij,
            b: phi_ik,
        });
    }
    let scale = dual_column_norm(phi_ij, phi_ik);
    Ok(dual_null_unnormalized(phi_ij, phi_ik).map(|z| z / Complex64::new(scale, 0.0)))
}

/// Combiner cancelling the links arriving at `phi_li` and `phi_mi`.
pub fn closed_form_rx_dual(phi_li: f64, phi_mi: f64) -> Result<CMatrix> {
    closed_form_tx_dual(phi_li, phi_mi)
}

/// Direct gain of a single-null user: `sin(φii − φij)·sin(φii − φki)`.
pub fn single_null_gain(phi_ii: f64, phi_ij: f64, phi_ki: f64) -> f64 {
    (phi_ii - phi_ij).sin() * (phi_ii - phi_ki).sin()
}

/// One factor of the dual-null gain:
/// `sin(φ − φa) − sin(φ − φb) + sin(φa − φb)`.
pub fn dual_null_factor(phi: f64, phi_a: f64, phi_b: f64) -> f64 {
    (phi - phi_a).sin() - (phi - phi_b).sin() + (phi_a - phi_b).sin()
}

/// Direct gain `γ` of a user whose transmitter cancels the links at
/// `phi_ij`, `phi_ik` and whose receiver cancels those at `phi_li`, `phi_mi`,
/// before normalization.
pub fn dual_null_gain(phi_ii: f64, phi_ij: f64, phi_ik: f64, phi_li: f64, phi_mi: f64) -> f64 {
    dual_null_factor(phi_ii, phi_ij, phi_ik) * dual_null_factor(phi_ii, phi_li, phi_mi)
}
