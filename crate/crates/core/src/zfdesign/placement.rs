//! Interference cancellation by physically rotating a pair of co-located
//! in-plane dipoles (one electric, one magnetic).
//!
//! An x-oriented dipole rotated to azimuth `α` has azimuth-plane gain
//! `sin(φ − α)`, which vanishes along its own axis. Pointing a
//! transmitter's axis at a cross receiver, or a receiver's axis along an
//! interfering ray, removes that link on both polarizations at once. A
//! y-oriented dipole at rotation `ρ` behaves as an x-oriented one at
//! `ρ + π/2`.

use std::f64::consts::FRAC_PI_2;

use super::assignment::{assign_with_capacity, NullingAssignment};
use crate::error::{Error, Result};
use crate::geometry::{genericity_margin, Scenario};
use crate::linalg::{singular_values, CMatrix};
use crate::polarization::{ChannelSet, ComponentSet, DipoleComponent, DipoleConfig};

#[derive(Debug, Clone)]
pub struct OptimalPlacement {
    pub assignment: NullingAssignment,
    /// Axis azimuth of each transmitter's dipole pair.
    pub tx_axes: Vec<f64>,
    pub rx_axes: Vec<f64>,
    pub tx_configs: Vec<DipoleConfig>,
    pub rx_configs: Vec<DipoleConfig>,
    /// Predicted diagonal gain of each direct link, excluding `a·e^{-jkr}`.
    pub predicted_gains: Vec<f64>,
    pub genericity_margin: f64,
    /// Users whose predicted gain is zero (degenerate geometry).
    pub zero_gain_users: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairAxis {
    X,
    Y,
}

fn pair_axis(comps: &ComponentSet) -> Result<PairAxis> {
    use DipoleComponent::*;
    let s = comps.as_slice();
    if s.len() != 2 {
        return Err(Error::Unsupported(format!(
            "optimal placement needs exactly one in-plane electric and one in-plane magnetic dipole, got `{comps}`"
        )));
    }
    let electric = s.iter().find(|c| c.is_electric());
    let magnetic = s.iter().find(|c| !c.is_electric());
    match (electric, magnetic) {
        (Some(Ex), Some(Mx)) => Ok(PairAxis::X),
        (Some(Ey), Some(My)) => Ok(PairAxis::Y),
        (Some(Ex), Some(My)) | (Some(Ey), Some(Mx)) => Err(Error::Unsupported(format!(
            "`{comps}`: a single node rotation cannot align orthogonal electric and magnetic axes"
        ))),
        _ => Err(Error::Unsupported(format!(
            "optimal placement needs one in-plane electric and one in-plane magnetic dipole, got `{comps}`"
        ))),
    }
}

fn rotation_for_axis(axis: PairAxis, target: f64) -> f64 {
    match axis {
        PairAxis::X => target,
        PairAxis::Y => target - FRAC_PI_2,
    }
}

/// Rotations for `K ∈ {2, 3}`. Each transmitter points its axis at the
/// receiver it must protect under the cyclic one-link assignment, each
/// receiver along the ray it must reject; a receiver with nothing to reject
/// turns its axis broadside to the direct link.
pub fn optimal_placement_design(scenario: &Scenario) -> Result<OptimalPlacement> {
    scenario.validate()?;
    let k = scenario.users();
    if !(2..=3).contains(&k) {
        return Err(Error::Unsupported(format!(
            "optimal placement handles 2 or 3 users, got {k}"
        )));
    }
    if scenario.antennas() != 1 {
        return Err(Error::Unsupported(
            "optimal placement uses a single antenna per node".into(),
        ));
    }
    let assignment = assign_with_capacity(k, 1);
    let angle = |i: usize, j: usize| scenario.link_geometry(i, j).map(|g| g.angle);

    let mut tx_axes = Vec::with_capacity(k);
    let mut rx_axes = Vec::with_capacity(k);
    let mut tx_configs = Vec::with_capacity(k);
    let mut rx_configs = Vec::with_capacity(k);
    for n in 0..k {
        let tx_axis = match assignment.tx_nulls(n).as_slice() {
            [j] => angle(n, *j)?,
            _ => angle(n, n)? + FRAC_PI_2,
        };
        let rx_axis = match assignment.rx_nulls(n).as_slice() {
            [t] => angle(*t, n)?,
            _ => angle(n, n)? + FRAC_PI_2,
        };
        let tx_pair = pair_axis(&scenario.tx_components[n])?;
        let rx_pair = pair_axis(&scenario.rx_components[n])?;
        tx_configs.push(DipoleConfig::rotated(
            scenario.tx_components[n].clone(),
            rotation_for_axis(tx_pair, tx_axis),
        ));
        rx_configs.push(DipoleConfig::rotated(
            scenario.rx_components[n].clone(),
            rotation_for_axis(rx_pair, rx_axis),
        ));
        tx_axes.push(tx_axis);
        rx_axes.push(rx_axis);
    }

    let mut predicted_gains = Vec::with_capacity(k);
    let mut zero_gain_users = Vec::new();
    for n in 0..k {
        let phi = angle(n, n)?;
        let g = (phi - rx_axes[n]).sin() * (phi - tx_axes[n]).sin();
        if g.abs() < 1e-12 {
            zero_gain_users.push(n);
        }
        predicted_gains.push(g);
    }

    Ok(OptimalPlacement {
        assignment,
        tx_axes,
        rx_axes,
        tx_configs,
        rx_configs,
        predicted_gains,
        genericity_margin: genericity_margin(scenario),
        zero_gain_users,
    })
}

impl OptimalPlacement {
    /// Channels with every node's dipoles rotated into place.
    pub fn channels(&self, scenario: &Scenario) -> Result<ChannelSet> {
        ChannelSet::build_with(scenario, &self.tx_configs, &self.rx_configs)
    }

    /// Largest absolute entry over all cross-link channels after rotation.
    pub fn max_cross_entry(&self, scenario: &Scenario) -> Result<f64> {
        let ch = self.channels(scenario)?;
        Ok(ch
            .iter()
            .filter(|h| h.tx != h.rx)
            .map(|h| crate::linalg::max_abs(&h.matrix))
            .fold(0.0, f64::max))
    }

    /// Direct-link matrices after rotation (the effective channels; the
    /// beamformers are identities).
    pub fn direct_channels(&self, scenario: &Scenario) -> Result<Vec<CMatrix>> {
        let ch = self.channels(scenario)?;
        Ok((0..scenario.users())
            .map(|i| ch.get(i, i).matrix.clone())
            .collect())
    }

    pub fn direct_stream_gains(&self, scenario: &Scenario) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .direct_channels(scenario)?
            .iter()
            .map(singular_values)
            .collect())
    }
}
