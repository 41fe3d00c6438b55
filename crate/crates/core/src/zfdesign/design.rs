use num_complex::Complex64;
use rayon::prelude::*;

use super::assignment::{assign_with_capacity, nulling_capacity_for, NullingAssignment};
use super::closed_form::{
    closed_form_rx_dual, closed_form_rx_single, closed_form_tx_dual, closed_form_tx_single,
    dual_column_norm, dual_null_gain, single_null_gain,
};
use crate::error::{Error, Result};
use crate::geometry::{genericity_margin, Scenario};
use crate::linalg::{
    full_svd, null_space, numerical_rank, orthonormality_defect, singular_values, CMatrix, RANK_TOL,
};
use crate::polarization::{path_factor, ChannelSet, DipoleComponent};

/// Streams per user; a line-of-sight link never supports more.
pub const STREAMS: usize = 2;
/// Relative residual interference at or below which a link counts as cancelled.
pub const LEAKAGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformerOrigin {
    ClosedFormSingle,
    ClosedFormDual,
    NullSpace,
    /// Identity on physically rotated dipoles.
    Rotation,
}

impl BeamformerOrigin {
    pub fn token(self) -> &'static str {
        match self {
            BeamformerOrigin::ClosedFormSingle => "closed-single",
            BeamformerOrigin::ClosedFormDual => "closed-dual",
            BeamformerOrigin::NullSpace => "null-space",
            BeamformerOrigin::Rotation => "rotation",
        }
    }

    pub fn from_token(t: &str) -> Option<Self> {
        [
            Self::ClosedFormSingle,
            Self::ClosedFormDual,
            Self::NullSpace,
            Self::Rotation,
        ]
        .into_iter()
        .find(|o| o.token() == t)
    }
}

/// Precoder (transmit) or combiner (receive) with orthonormal columns.
#[derive(Debug, Clone)]
pub struct Beamformer {
    pub matrix: CMatrix,
    pub origin: BeamformerOrigin,
    /// Indices of the opposite-end nodes whose links this beamformer cancels.
    pub nulled: Vec<usize>,
    /// Dimension of the null space it was chosen from.
    pub null_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormKind {
    /// `λ = sin(φii − φij)·sin(φii − φki)`.
    SingleNull,
    /// `γ`, the product of the two dual-null factors.
    DualNull,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormGain {
    pub kind: ClosedFormKind,
    /// `λ` or `γ` as a bare product of sines.
    pub raw: f64,
    /// Predicted diagonal entry of Λ with the unit-norm beamformers used here.
    pub predicted: Complex64,
}

/// The 2×2 direct-link matrix `Λ = U^H H^{ii} V` of one user.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub user: usize,
    pub lambda: CMatrix,
    pub path_factor: Complex64,
    /// Singular values of Λ relative to the largest singular value of the
    /// unbeamformed direct channel.
    pub stream_gains: Vec<f64>,
    pub closed_form: Option<ClosedFormGain>,
}

impl EffectiveChannel {
    pub fn rank(&self) -> usize {
        self.stream_gains.iter().filter(|&&g| g > RANK_TOL).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageEntry {
    pub tx: usize,
    pub rx: usize,
    pub side: super::NullingSide,
    /// `‖U_rx^H H V_tx‖_F`.
    pub absolute: f64,
    /// `absolute / ‖Λ_tx‖_F`, with the denominator floored at
    /// `RANK_TOL · σ₁(H^{tx,tx})` so that a dead direct link does not divide by zero.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignWarning {
    DegenerateGeometry { margin: f64 },
    ZeroGain { user: usize, stream_gains: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct ZfDesign {
    pub precoders: Vec<Beamformer>,
    pub combiners: Vec<Beamformer>,
    pub assignment: NullingAssignment,
    pub effective: Vec<EffectiveChannel>,
    pub leakage: Vec<LeakageEntry>,
    /// Largest relative leakage over assigned links.
    pub leakage_max: f64,
    pub genericity_margin: f64,
    pub warnings: Vec<DesignWarning>,
}

impl ZfDesign {
    pub fn users(&self) -> usize {
        self.precoders.len()
    }

    pub fn nulling_certified(&self) -> bool {
        self.leakage_max <= LEAKAGE_TOL
    }

    /// All assigned links cancelled and every user keeps two streams.
    pub fn is_certified(&self) -> bool {
        self.nulling_certified() && self.effective.iter().all(|e| e.rank() == STREAMS)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DesignOptions {
    /// Use the closed forms wherever a node layout admits one.
    pub prefer_closed_form: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            prefer_closed_form: true,
        }
    }
}

/// Orthonormal basis of the joint null space of the stacked constraint
/// matrices (each `? × node_dim`, acting on the right), truncated to its
/// first `want` columns: right singular vectors of the smallest singular
/// values, ordered by singular value then index.
pub fn nullspace_beamformer(stacked: &[&CMatrix], node_dim: usize, want: usize) -> Result<CMatrix> {
    let basis = null_basis(stacked, node_dim);
    if basis.ncols() < want {
        return Err(Error::InfeasibleNulling {
            node: "node".into(),
            available: basis.ncols(),
            wanted: want,
        });
    }
    Ok(basis.columns(0, want).into_owned())
}

fn null_basis(stacked: &[&CMatrix], node_dim: usize) -> CMatrix {
    if stacked.is_empty() {
        return CMatrix::identity(node_dim, node_dim);
    }
    null_space(&crate::linalg::vstack(stacked), node_dim)
}

/// Basis of precoders at transmitter `tx` that cancel the links to `receivers`.
pub fn tx_null_basis(
    channels: &ChannelSet,
    tx: usize,
    receivers: &[usize],
    node_dim: usize,
) -> CMatrix {
    let blocks: Vec<&CMatrix> = receivers
        .iter()
        .map(|&j| &channels.get(tx, j).matrix)
        .collect();
    null_basis(&blocks, node_dim)
}

/// Basis of combiners at receiver `rx` that cancel the links from `transmitters`.
pub fn rx_null_basis(
    channels: &ChannelSet,
    rx: usize,
    transmitters: &[usize],
    node_dim: usize,
) -> CMatrix {
    let adj: Vec<CMatrix> = transmitters
        .iter()
        .map(|&i| channels.get(i, rx).matrix.adjoint())
        .collect();
    let blocks: Vec<&CMatrix> = adj.iter().collect();
    null_basis(&blocks, node_dim)
}

/// Nulling capacity implied by the scenario's configurations: the weakest
/// node's spare dimensions divided by the largest link rank.
pub fn scenario_capacity(scenario: &Scenario, channels: &ChannelSet) -> usize {
    let link_rank = channels
        .iter()
        .filter(|h| h.tx != h.rx)
        .map(|h| numerical_rank(&h.matrix, RANK_TOL))
        .max()
        .unwrap_or(0);
    let dim = (0..scenario.users())
        .flat_map(|n| [scenario.tx_dim(n), scenario.rx_dim(n)])
        .min()
        .unwrap_or(0);
    nulling_capacity_for(dim, link_rank, STREAMS)
}

/// Cyclic assignment sized to the scenario's actual nulling capacity.
pub fn auto_assignment(scenario: &Scenario) -> Result<NullingAssignment> {
    let channels = ChannelSet::build(scenario)?;
    let cap = scenario_capacity(scenario, &channels).min(scenario.users());
    Ok(assign_with_capacity(scenario.users(), cap))
}

pub fn design_zf(scenario: &Scenario, assignment: &NullingAssignment) -> Result<ZfDesign> {
    design_zf_with(scenario, assignment, DesignOptions::default())
}

pub fn design_zf_with(
    scenario: &Scenario,
    assignment: &NullingAssignment,
    options: DesignOptions,
) -> Result<ZfDesign> {
    scenario.validate()?;
    let k = scenario.users();
    if assignment.users() != k {
        return Err(Error::InvalidScenario {
            field: "assignment",
            reason: format!(
                "assignment covers {} users, scenario has {k}",
                assignment.users()
            ),
        });
    }
    if !assignment.is_complete() {
        return Err(Error::IncompleteAssignment {
            unassigned: assignment.unassigned().len(),
        });
    }
    let channels = ChannelSet::build(scenario)?;

    let per_user: Vec<(Beamformer, Beamformer)> = (0..k)
        .into_par_iter()
        .map(|i| design_user(scenario, &channels, assignment, i, options))
        .collect::<Result<_>>()?;
    let (precoders, combiners): (Vec<_>, Vec<_>) = per_user.into_iter().unzip();

    let effective = effective_channels_from(scenario, &channels, &precoders, &combiners);
    let leakage = leakage_report(&channels, assignment, &precoders, &combiners, &effective);
    let leakage_max = leakage
        .iter()
        .filter(|l| l.side != super::NullingSide::Unassigned)
        .map(|l| l.relative)
        .fold(0.0, f64::max);

    let margin = genericity_margin(scenario);
    let mut warnings = Vec::new();
    if margin == 0.0 {
        warnings.push(DesignWarning::DegenerateGeometry { margin });
    }
    for e in &effective {
        if e.rank() < STREAMS {
            warnings.push(DesignWarning::ZeroGain {
                user: e.user,
                stream_gains: e.stream_gains.clone(),
            });
        }
    }

    Ok(ZfDesign {
        precoders,
        combiners,
        assignment: assignment.clone(),
        effective,
        leakage,
        leakage_max,
        genericity_margin: margin,
        warnings,
    })
}

fn is_four_in_plane(scenario: &Scenario, comps: &crate::polarization::ComponentSet) -> bool {
    use DipoleComponent::*;
    scenario.antennas() == 1 && comps.as_slice() == [Ex, Ey, Mx, My]
}

fn is_full_single(scenario: &Scenario, comps: &crate::polarization::ComponentSet) -> bool {
    scenario.antennas() == 1 && comps.is_full()
}

fn design_user(
    scenario: &Scenario,
    channels: &ChannelSet,
    assignment: &NullingAssignment,
    i: usize,
    options: DesignOptions,
) -> Result<(Beamformer, Beamformer)> {
    let tx_targets = assignment.tx_nulls(i);
    let rx_sources = assignment.rx_nulls(i);
    let tx_dim = scenario.tx_dim(i);
    let rx_dim = scenario.rx_dim(i);

    let n_tx = tx_null_basis(channels, i, &tx_targets, tx_dim);
    if n_tx.ncols() < STREAMS {
        return Err(Error::InfeasibleNulling {
            node: format!("transmitter {i}"),
            available: n_tx.ncols(),
            wanted: STREAMS,
        });
    }
    let n_rx = rx_null_basis(channels, i, &rx_sources, rx_dim);
    if n_rx.ncols() < STREAMS {
        return Err(Error::InfeasibleNulling {
            node: format!("receiver {i}"),
            available: n_rx.ncols(),
            wanted: STREAMS,
        });
    }

    let angle = |t: usize, r: usize| channels.get(t, r).geometry.angle;
    let direct = &channels.get(i, i).matrix;

    let closed_tx = if options.prefer_closed_form {
        let comps = &scenario.tx_components[i];
        match tx_targets.as_slice() {
            [j] if is_four_in_plane(scenario, comps) => Some((
                closed_form_tx_single(angle(i, *j)),
                BeamformerOrigin::ClosedFormSingle,
            )),
            [j, l] if is_full_single(scenario, comps) => {
                closed_form_tx_dual(angle(i, *j), angle(i, *l))
                    .ok()
                    .map(|m| (m, BeamformerOrigin::ClosedFormDual))
            }
            _ => None,
        }
    } else {
        None
    };
    let precoder = match closed_tx {
        Some((matrix, origin)) => Beamformer {
            matrix,
            origin,
            nulled: tx_targets.clone(),
            null_dim: n_tx.ncols(),
        },
        None => {
            let matrix = if n_tx.ncols() == STREAMS {
                n_tx.clone()
            } else {
                // strongest direct-link directions inside the null space
                let w = full_svd(&(direct * &n_tx))
                    .v
                    .columns(0, STREAMS)
                    .into_owned();
                &n_tx * w
            };
            Beamformer {
                matrix,
                origin: BeamformerOrigin::NullSpace,
                nulled: tx_targets.clone(),
                null_dim: n_tx.ncols(),
            }
        }
    };

    let closed_rx = if options.prefer_closed_form {
        let comps = &scenario.rx_components[i];
        match rx_sources.as_slice() {
            [t] if is_four_in_plane(scenario, comps) => Some((
                closed_form_rx_single(angle(*t, i)),
                BeamformerOrigin::ClosedFormSingle,
            )),
            [t, l] if is_full_single(scenario, comps) => {
                closed_form_rx_dual(angle(*t, i), angle(*l, i))
                    .ok()
                    .map(|m| (m, BeamformerOrigin::ClosedFormDual))
            }
            _ => None,
        }
    } else {
        None
    };
    let combiner = match closed_rx {
        Some((matrix, origin)) => Beamformer {
            matrix,
            origin,
            nulled: rx_sources.clone(),
            null_dim: n_rx.ncols(),
        },
        None => {
            let matrix = if n_rx.ncols() == STREAMS {
                n_rx.clone()
            } else {
                let g = n_rx.adjoint() * direct * &precoder.matrix;
                let svd = full_svd(&g);
                let w = svd.u.columns(0, STREAMS).into_owned();
                let u = &n_rx * w;
                if orthonormality_defect(&u) > 1e-10 {
                    n_rx.columns(0, STREAMS).into_owned()
                } else {
                    u
                }
            };
            Beamformer {
                matrix,
                origin: BeamformerOrigin::NullSpace,
                nulled: rx_sources.clone(),
                null_dim: n_rx.ncols(),
            }
        }
    };
    Ok((precoder, combiner))
}

fn closed_form_gain(
    channels: &ChannelSet,
    i: usize,
    v: &Beamformer,
    u: &Beamformer,
    wavenumber: f64,
) -> Option<ClosedFormGain> {
    let angle = |t: usize, r: usize| channels.get(t, r).geometry.angle;
    let pf = path_factor(&channels.get(i, i).geometry, wavenumber);
    let phi_ii = angle(i, i);
    match (v.origin, u.origin, v.nulled.as_slice(), u.nulled.as_slice()) {
        (BeamformerOrigin::ClosedFormSingle, BeamformerOrigin::ClosedFormSingle, [j], [kk]) => {
            let raw = single_null_gain(phi_ii, angle(i, *j), angle(*kk, i));
            Some(ClosedFormGain {
                kind: ClosedFormKind::SingleNull,
                raw,
                predicted: pf * raw,
            })
        }
        (BeamformerOrigin::ClosedFormDual, BeamformerOrigin::ClosedFormDual, [j, kk], [l, m]) => {
            let (pij, pik, pli, pmi) = (angle(i, *j), angle(i, *kk), angle(*l, i), angle(*m, i));
            let raw = dual_null_gain(phi_ii, pij, pik, pli, pmi);
            let norm = dual_column_norm(pij, pik) * dual_column_norm(pli, pmi);
            Some(ClosedFormGain {
                kind: ClosedFormKind::DualNull,
                raw,
                predicted: pf * (raw / norm),
            })
        }
        _ => None,
    }
}

fn effective_channels_from(
    scenario: &Scenario,
    channels: &ChannelSet,
    precoders: &[Beamformer],
    combiners: &[Beamformer],
) -> Vec<EffectiveChannel> {
    (0..scenario.users())
        .map(|i| {
            let h = channels.get(i, i);
            let lambda = combiners[i].matrix.adjoint() * &h.matrix * &precoders[i].matrix;
            let scale = singular_values(&h.matrix).first().copied().unwrap_or(0.0);
            let stream_gains = singular_values(&lambda)
                .into_iter()
                .map(|s| if scale > 0.0 { s / scale } else { 0.0 })
                .collect();
            EffectiveChannel {
                user: i,
                lambda,
                path_factor: path_factor(&h.geometry, scenario.wavenumber),
                stream_gains,
                closed_form: closed_form_gain(
                    channels,
                    i,
                    &precoders[i],
                    &combiners[i],
                    scenario.wavenumber,
                ),
            }
        })
        .collect()
}

fn leakage_report(
    channels: &ChannelSet,
    assignment: &NullingAssignment,
    precoders: &[Beamformer],
    combiners: &[Beamformer],
    effective: &[EffectiveChannel],
) -> Vec<LeakageEntry> {
    let k = precoders.len();
    let mut out = Vec::with_capacity(k * k.saturating_sub(1));
    for i in 0..k {
        let direct_scale = singular_values(&channels.get(i, i).matrix)
            .first()
            .copied()
            .unwrap_or(0.0);
        let floor = RANK_TOL * direct_scale;
        let denom = effective[i].lambda.norm().max(floor);
        for j in (0..k).filter(|&j| j != i) {
            let leak =
                combiners[j].matrix.adjoint() * &channels.get(i, j).matrix * &precoders[i].matrix;
            let absolute = leak.norm();
            let relative = if denom > 0.0 {
                absolute / denom
            } else if absolute == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            out.push(LeakageEntry {
                tx: i,
                rx: j,
                side: assignment.side(i, j),
                absolute,
                relative,
            });
        }
    }
    out
}

/// Effective channels of an existing design against the scenario's channels.
pub fn effective_channels(design: &ZfDesign, scenario: &Scenario) -> Result<Vec<EffectiveChannel>> {
    let channels = ChannelSet::build(scenario)?;
    Ok(effective_channels_from(
        scenario,
        &channels,
        &design.precoders,
        &design.combiners,
    ))
}

/// Leakage and effective channels recomputed for a given set of beamformers.
#[derive(Debug, Clone)]
pub struct LeakageCheck {
    pub report: Vec<LeakageEntry>,
    /// Largest relative leakage over assigned links.
    pub leakage_max: f64,
    pub effective: Vec<EffectiveChannel>,
}

impl LeakageCheck {
    pub fn is_certified(&self) -> bool {
        self.leakage_max <= LEAKAGE_TOL && self.effective.iter().all(|e| e.rank() == STREAMS)
    }
}

/// Recomputes leakage for beamformers that may have been edited or
/// reloaded.
pub fn recheck_leakage(
    scenario: &Scenario,
    assignment: &NullingAssignment,
    precoders: &[Beamformer],
    combiners: &[Beamformer],
) -> Result<LeakageCheck> {
    let channels = ChannelSet::build(scenario)?;
    recheck_leakage_on(scenario, &channels, assignment, precoders, combiners)
}

/// As [`recheck_leakage`], against channels built elsewhere (for example
/// with rotated dipoles).
pub fn recheck_leakage_on(
    scenario: &Scenario,
    channels: &ChannelSet,
    assignment: &NullingAssignment,
    precoders: &[Beamformer],
    combiners: &[Beamformer],
) -> Result<LeakageCheck> {
    let k = scenario.users();
    if assignment.users() != k || precoders.len() != k || combiners.len() != k {
        return Err(Error::InvalidScenario {
            field: "beamformers",
            reason: format!(
                "{} precoders, {} combiners and a {}-user assignment for {k} users",
                precoders.len(),
                combiners.len(),
                assignment.users()
            ),
        });
    }
    for i in 0..k {
        let (v, u) = (&precoders[i].matrix, &combiners[i].matrix);
        if v.nrows() != scenario.tx_dim(i)
            || u.nrows() != scenario.rx_dim(i)
            || v.ncols() != u.ncols()
        {
            return Err(Error::InvalidScenario {
                field: "beamformers",
                reason: format!(
                    "user {i}: precoder {}x{}, combiner {}x{} do not fit node dimensions {}/{}",
                    v.nrows(),
                    v.ncols(),
                    u.nrows(),
                    u.ncols(),
                    scenario.tx_dim(i),
                    scenario.rx_dim(i)
                ),
            });
        }
    }
    let effective = effective_channels_from(scenario, channels, precoders, combiners);
    let report = leakage_report(channels, assignment, precoders, combiners, &effective);
    let leakage_max = report
        .iter()
        .filter(|l| l.side != super::NullingSide::Unassigned)
        .map(|l| l.relative)
        .fold(0.0, f64::max);
    Ok(LeakageCheck {
        report,
        leakage_max,
        effective,
    })
}
