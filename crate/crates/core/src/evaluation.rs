//! Sum rates, multiplexing-gain estimates and degree-of-freedom counts.
//!
//! The total transmit power `snr` (noise variance 1 at every receiver) is
//! split equally over the `K` users and their two streams. Residual
//! interference after combining is treated as Gaussian noise whose power
//! scales with the same per-stream power, so an uncancelled link makes the
//! sum rate saturate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{random_generic_scenario, Scenario};
use crate::linalg::{full_svd, singular_values, CMatrix, RANK_TOL};
use crate::polarization::{ChannelSet, ComponentSet, DipoleComponent};
use crate::zfdesign::{
    auto_assignment, design_zf, OptimalPlacement, ZfDesign, LEAKAGE_TOL, STREAMS,
};

/// Default SNR pair for the high-SNR slope. Chosen so that streams with
/// relative power gain down to ~1e-9 (1/r² path loss over a 100 m area
/// times products of sines near the separation limit) are already in their
/// asymptotic regime.
pub const SNR_LO: f64 = 1e12;
pub const SNR_HI: f64 = 1e14;

/// Post-beamforming view of one user: its direct 2×2 channel and the
/// 2×2 blocks through which every other transmitter reaches its combiner.
#[derive(Debug, Clone)]
pub struct UserLink {
    pub lambda: CMatrix,
    pub interference: Vec<CMatrix>,
    /// Largest singular value of the unbeamformed direct channel.
    pub direct_scale: f64,
}

impl UserLink {
    /// Unit-power residual interference covariance `Σ B Bᴴ`.
    pub fn residual_covariance(&self) -> CMatrix {
        let n = self.lambda.nrows();
        self.interference
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, b| acc + b * b.adjoint())
    }
}

pub fn design_links(design: &ZfDesign, scenario: &Scenario) -> Result<Vec<UserLink>> {
    let channels = ChannelSet::build(scenario)?;
    let k = scenario.users();
    Ok((0..k)
        .map(|i| {
            let u_h = design.combiners[i].matrix.adjoint();
            let lambda = &u_h * &channels.get(i, i).matrix * &design.precoders[i].matrix;
            let interference = (0..k)
                .filter(|&t| t != i)
                .map(|t| &u_h * &channels.get(t, i).matrix * &design.precoders[t].matrix)
                .collect();
            UserLink {
                lambda,
                interference,
                direct_scale: top_singular(&channels.get(i, i).matrix),
            }
        })
        .collect())
}

/// Rotated-dipole systems: beamformers are identities.
pub fn placement_links(placement: &OptimalPlacement, scenario: &Scenario) -> Result<Vec<UserLink>> {
    let channels = placement.channels(scenario)?;
    let k = scenario.users();
    Ok((0..k)
        .map(|i| {
            let direct = channels.get(i, i).matrix.clone();
            UserLink {
                direct_scale: top_singular(&direct),
                lambda: direct,
                interference: (0..k)
                    .filter(|&t| t != i)
                    .map(|t| channels.get(t, i).matrix.clone())
                    .collect(),
            }
        })
        .collect())
}

fn top_singular(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `Σ_i log₂ det(I + (P/2) Λ_i Λ_iᴴ (I + (P/2) R_i)⁻¹)` with `P = snr/K`
/// and `R_i` the unit-power residual covariance of user `i`.
pub fn sum_rate(links: &[UserLink], snr: f64) -> f64 {
    let residual: Vec<CMatrix> = links.iter().map(UserLink::residual_covariance).collect();
    let lambdas: Vec<&CMatrix> = links.iter().map(|l| &l.lambda).collect();
    sum_rate_parts(&lambdas, &residual, snr)
}

pub fn sum_rate_parts(lambdas: &[&CMatrix], residual: &[CMatrix], snr: f64) -> f64 {
    assert!(snr > 0.0, "snr must be positive");
    let k = lambdas.len();
    if k == 0 {
        return 0.0;
    }
    let per_stream = snr / (k as f64 * STREAMS as f64);
    lambdas
        .iter()
        .zip(residual)
        .map(|(lambda, r)| {
            let n = lambda.nrows();
            let noise = CMatrix::identity(n, n) + r * num_complex::Complex64::new(per_stream, 0.0);
            // whiten by the Cholesky factor of the noise-plus-interference covariance
            let chol = noise
                .cholesky()
                .expect("noise covariance is positive definite");
            let whitened = chol
                .l()
                .solve_lower_triangular(lambda)
                .expect("triangular factor is nonsingular");
            singular_values(&whitened)
                .into_iter()
                .map(|s| (per_stream * s * s).ln_1p() / std::f64::consts::LN_2)
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub label: String,
    /// `(snr, sum_rate)` with strictly increasing snr.
    pub points: Vec<(f64, f64)>,
}

pub fn rate_curve(label: impl Into<String>, links: &[UserLink], snr_grid: &[f64]) -> RateCurve {
    let mut grid = snr_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    RateCurve {
        label: label.into(),
        points: grid.into_iter().map(|s| (s, sum_rate(links, s))).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuxgEstimate {
    pub gamma_hat: f64,
    pub snr_pair: (f64, f64),
    /// Some user sees interference above the leakage tolerance.
    pub residual_interference: bool,
}

/// `(R(hi) − R(lo)) / (log₂ hi − log₂ lo)` from points already on the curve.
pub fn muxg_slope(curve: &RateCurve, snr_lo: f64, snr_hi: f64) -> Result<MuxgEstimate> {
    let at = |s: f64| {
        curve
            .points
            .iter()
            .find(|(x, _)| *x == s)
            .map(|p| p.1)
            .ok_or(Error::MissingSnr(s))
    };
    let (r_lo, r_hi) = (at(snr_lo)?, at(snr_hi)?);
    Ok(MuxgEstimate {
        gamma_hat: slope(r_lo, r_hi, snr_lo, snr_hi),
        snr_pair: (snr_lo, snr_hi),
        residual_interference: false,
    })
}

fn slope(r_lo: f64, r_hi: f64, snr_lo: f64, snr_hi: f64) -> f64 {
    ((r_hi - r_lo) / (snr_hi.log2() - snr_lo.log2())).max(0.0)
}

pub fn muxg_estimate(links: &[UserLink], snr_lo: f64, snr_hi: f64) -> MuxgEstimate {
    let residual_interference = links.iter().any(|l| {
        let denom = l.lambda.norm().max(RANK_TOL * l.direct_scale);
        l.interference
            .iter()
            .any(|b| b.norm() > LEAKAGE_TOL * denom)
    });
    MuxgEstimate {
        gamma_hat: slope(
            sum_rate(links, snr_lo),
            sum_rate(links, snr_hi),
            snr_lo,
            snr_hi,
        ),
        snr_pair: (snr_lo, snr_hi),
        residual_interference,
    }
}

/// Interference-free streams: for each user, the part of the combiner span
/// that sees no interference above `LEAKAGE_TOL` (relative to the direct
/// link), and the rank of the direct channel seen through it.
pub fn dof_from_links(links: &[UserLink]) -> usize {
    links.iter().map(user_dof).sum()
}

fn user_dof(link: &UserLink) -> usize {
    let n = link.lambda.nrows();
    let gain_floor = RANK_TOL * link.direct_scale;
    let clean = if link.interference.is_empty() {
        CMatrix::identity(n, n)
    } else {
        let adj: Vec<CMatrix> = link.interference.iter().map(|b| b.adjoint()).collect();
        let stacked_h = crate::linalg::vstack(&adj.iter().collect::<Vec<_>>());
        let tau = LEAKAGE_TOL * link.lambda.norm().max(gain_floor);
        // left singular vectors of [B_1 … B_{K−1}] = right singular vectors of its adjoint
        let svd = full_svd(&stacked_h);
        let busy = svd.singular_values.iter().filter(|&&s| s > tau).count();
        svd.v.columns(busy, n - busy).into_owned()
    };
    if clean.ncols() == 0 {
        return 0;
    }
    singular_values(&(clean.adjoint() * &link.lambda))
        .into_iter()
        .filter(|&s| s > gain_floor)
        .count()
}

pub fn dof_count(design: &ZfDesign, scenario: &Scenario) -> Result<usize> {
    Ok(dof_from_links(&design_links(design, scenario)?))
}

/// Nested component sets of sizes 2 through 6.
pub fn nested_subsets() -> Vec<ComponentSet> {
    use DipoleComponent::*;
    let order = [Ex, Ey, Mx, My, Ez, Mz];
    (2..=6)
        .map(|n| ComponentSet::new(order[..n].to_vec()).expect("distinct"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub components: ComponentSet,
    pub trials: usize,
    pub mean_dof: f64,
    pub min_dof: usize,
    pub max_dof: usize,
    pub per_trial: Vec<usize>,
}

/// Best-effort certified DOF of one scenario: the largest value over user
/// prefixes `1..=K` that admit a complete assignment within the
/// configuration's nulling capacity.
pub fn best_effort_dof(scenario: &Scenario) -> Result<usize> {
    let mut best = 0;
    for k in 1..=scenario.users() {
        let sub = scenario.prefix(k);
        let assignment = auto_assignment(&sub)?;
        if !assignment.is_complete() {
            continue;
        }
        match design_zf(&sub, &assignment) {
            Ok(d) => best = best.max(dof_count(&d, &sub)?),
            Err(Error::InfeasibleNulling { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// DOF versus component count over `trials` random generic placements
/// (seeds `seed..seed + trials`, one antenna per node).
pub fn dipole_sweep(
    users: usize,
    subsets: &[ComponentSet],
    trials: usize,
    seed: u64,
    min_angle_sep: f64,
) -> Result<Vec<SweepRow>> {
    assert!(trials >= 1, "at least one trial");
    let scenarios: Vec<Scenario> = (0..trials as u64)
        .map(|t| random_generic_scenario(users, 1, seed + t, min_angle_sep))
        .collect::<Result<_>>()?;
    subsets
        .iter()
        .map(|subset| {
            let per_trial: Vec<usize> = scenarios
                .par_iter()
                .map(|s| best_effort_dof(&s.clone().with_components(subset)))
                .collect::<Result<_>>()?;
            Ok(SweepRow {
                components: subset.clone(),
                trials,
                mean_dof: per_trial.iter().sum::<usize>() as f64 / trials as f64,
                min_dof: *per_trial.iter().min().unwrap(),
                max_dof: *per_trial.iter().max().unwrap(),
                per_trial,
            })
        })
        .collect()
}
