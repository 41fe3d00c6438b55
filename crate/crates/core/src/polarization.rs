//! Dipole radiation patterns and polarization channel matrices.
//!
//! A polarimetric antenna is a co-located set of up to three electric and
//! three magnetic dipoles. With unit excitation, the far field of each
//! dipole reduces to a pair of real gains on the θ̂ (vertical) and φ̂
//! (horizontal) unit vectors. All nodes lie in the azimuth plane, so a
//! line-of-sight link between two antennas is
//!
//! ```text
//! H = a · e^{-j k r} · (v_rx^T v_tx + h_rx^T h_tx)
//! ```
//!
//! where `v` and `h` are the vertical and horizontal pattern rows of the
//! selected components at the propagation angle. The receiver rows are
//! evaluated at the same angle as the transmitter rows; evaluating them at
//! `φ + π` instead only flips the sign of some rows and does not change any
//! rank, null space dimension or rate.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LinkGeometry, Scenario};
use crate::linalg::{kron, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DipoleComponent {
    Ex,
    Ey,
    Ez,
    Mx,
    My,
    Mz,
}

impl DipoleComponent {
    /// Global component order; closed-form beamformers index against it.
    pub const ALL: [DipoleComponent; 6] = [
        DipoleComponent::Ex,
        DipoleComponent::Ey,
        DipoleComponent::Ez,
        DipoleComponent::Mx,
        DipoleComponent::My,
        DipoleComponent::Mz,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            DipoleComponent::Ex => "ex",
            DipoleComponent::Ey => "ey",
            DipoleComponent::Ez => "ez",
            DipoleComponent::Mx => "mx",
            DipoleComponent::My => "my",
            DipoleComponent::Mz => "mz",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.token().eq_ignore_ascii_case(token))
    }

    pub fn is_electric(self) -> bool {
        matches!(
            self,
            DipoleComponent::Ex | DipoleComponent::Ey | DipoleComponent::Ez
        )
    }

    /// x/y-oriented dipoles; only these are affected by azimuth rotation.
    pub fn is_in_plane(self) -> bool {
        !matches!(self, DipoleComponent::Ez | DipoleComponent::Mz)
    }
}

impl fmt::Display for DipoleComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Far-field (θ̂, φ̂) gains of a unit-excitation dipole.
pub fn pattern_3d(component: DipoleComponent, theta: f64, phi: f64) -> (f64, f64) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    match component {
        DipoleComponent::Ex => (-ct * cp, sp),
        DipoleComponent::Ey => (-ct * sp, -cp),
        DipoleComponent::Ez => (st, 0.0),
        DipoleComponent::Mx => (sp, ct * cp),
        DipoleComponent::My => (-cp, ct * sp),
        DipoleComponent::Mz => (0.0, -st),
    }
}

/// Ordered, duplicate-free, nonempty subset of the six dipole components.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComponentSet(Vec<DipoleComponent>);

impl ComponentSet {
    pub fn new(components: Vec<DipoleComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidComponents("empty component list".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if components[..i].contains(c) {
                return Err(Error::InvalidComponents(format!("duplicate component {c}")));
            }
        }
        Ok(Self(components))
    }

    pub fn full() -> Self {
        Self(DipoleComponent::ALL.to_vec())
    }

    /// Parses whitespace- or comma-separated tokens such as `"ex ey mx my"`.
    pub fn parse(text: &str) -> Result<Self> {
        let comps = text
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                DipoleComponent::from_token(t)
                    .ok_or_else(|| Error::InvalidComponents(format!("unknown component `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    /// All 63 nonempty subsets in canonical order, by bitmask.
    pub fn all_subsets() -> Vec<Self> {
        (1u32..64)
            .map(|mask| {
                Self(
                    DipoleComponent::ALL
                        .into_iter()
                        .filter(|c| mask & (1 << c.index()) != 0)
                        .collect(),
                )
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[DipoleComponent] {
        &self.0
    }

    pub fn contains(&self, c: DipoleComponent) -> bool {
        self.0.contains(&c)
    }

    pub fn is_full(&self) -> bool {
        self.0 == DipoleComponent::ALL
    }

    pub fn tokens(&self) -> String {
        self.0
            .iter()
            .map(|c| c.token())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for ComponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens())
    }
}

/// Active components at one node plus the physical rotation of its x/y
/// dipole axes about z (zero for fixed placement).
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleConfig {
    pub components: ComponentSet,
    pub azimuth_rotation: f64,
}

impl DipoleConfig {
    pub fn fixed(components: ComponentSet) -> Self {
        Self {
            components,
            azimuth_rotation: 0.0,
        }
    }

    pub fn rotated(components: ComponentSet, azimuth_rotation: f64) -> Self {
        Self {
            components,
            azimuth_rotation,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternRows {
    /// θ̂-polarized gains, one per configured component.
    pub vertical: Vec<f64>,
    /// φ̂-polarized gains.
    pub horizontal: Vec<f64>,
}

pub fn azimuth_rows(config: &DipoleConfig, phi: f64) -> PatternRows {
    let n = config.len();
    let mut vertical = Vec::with_capacity(n);
    let mut horizontal = Vec::with_capacity(n);
    for &comp in config.components.as_slice() {
        let angle = if comp.is_in_plane() {
            phi - config.azimuth_rotation
        } else {
            phi
        };
        let (et, ep) = pattern_3d(comp, FRAC_PI_2, angle);
        vertical.push(et);
        horizontal.push(ep);
    }
    PatternRows {
        vertical,
        horizontal,
    }
}

/// Channel matrix of one transmitter → receiver link.
#[derive(Debug, Clone)]
pub struct PolarizationChannel {
    /// `(M·c_rx) × (M·c_tx)`.
    pub matrix: CMatrix,
    pub tx: usize,
    pub rx: usize,
    pub geometry: LinkGeometry,
}

/// Complex path factor `a · e^{-j k r}`.
pub fn path_factor(link: &LinkGeometry, wavenumber: f64) -> Complex64 {
    Complex64::from_polar(link.attenuation, -wavenumber * link.distance)
}

pub fn single_antenna_channel(
    link: &LinkGeometry,
    tx_cfg: &DipoleConfig,
    rx_cfg: &DipoleConfig,
    wavenumber: f64,
) -> PolarizationChannel {
    let tx = azimuth_rows(tx_cfg, link.angle);
    let rx = azimuth_rows(rx_cfg, link.angle);
    let scale = path_factor(link, wavenumber);
    let matrix = CMatrix::from_fn(rx_cfg.len(), tx_cfg.len(), |r, t| {
        scale * (rx.vertical[r] * tx.vertical[t] + rx.horizontal[r] * tx.horizontal[t])
    });
    PolarizationChannel {
        matrix,
        tx: link.tx,
        rx: link.rx,
        geometry: *link,
    }
}

/// Array phase vectors under the planar-wave approximation: a transmit
/// element displaced along the ray is closer to the receiver (phase lead),
/// a receive element displaced along the ray is farther (phase lag).
pub fn array_phases(
    offsets: &[[f64; 2]],
    angle: f64,
    wavenumber: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let (s, c) = angle.sin_cos();
    let proj: Vec<f64> = offsets.iter().map(|o| o[0] * c + o[1] * s).collect();
    let tx = proj
        .iter()
        .map(|&p| Complex64::from_polar(1.0, wavenumber * p))
        .collect();
    let rx = proj
        .iter()
        .map(|&p| Complex64::from_polar(1.0, -wavenumber * p))
        .collect();
    (tx, rx)
}

/// `M`-antenna channel: `(p_rx p_tx^T) ⊗ H_single`, antenna-major ordering.
pub fn array_channel(
    link: &LinkGeometry,
    tx_cfg: &DipoleConfig,
    rx_cfg: &DipoleConfig,
    offsets: &[[f64; 2]],
    wavenumber: f64,
) -> PolarizationChannel {
    let single = single_antenna_channel(link, tx_cfg, rx_cfg, wavenumber);
    if offsets.len() <= 1 {
        return single;
    }
    let (p_tx, p_rx) = array_phases(offsets, link.angle, wavenumber);
    let m = offsets.len();
    let phase = CMatrix::from_fn(m, m, |r, t| p_rx[r] * p_tx[t]);
    PolarizationChannel {
        matrix: kron(&phase, &single.matrix),
        ..single
    }
}

/// All `K × K` link channels of a scenario, indexed `(tx, rx)`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    users: usize,
    links: Vec<PolarizationChannel>,
}

impl ChannelSet {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        let tx_cfgs: Vec<DipoleConfig> = (0..scenario.users())
            .map(|i| scenario.tx_config(i))
            .collect();
        let rx_cfgs: Vec<DipoleConfig> = (0..scenario.users())
            .map(|j| scenario.rx_config(j))
            .collect();
        Self::build_with(scenario, &tx_cfgs, &rx_cfgs)
    }

    /// Builds channels with explicit (possibly rotated) node configurations.
    pub fn build_with(
        scenario: &Scenario,
        tx_cfgs: &[DipoleConfig],
        rx_cfgs: &[DipoleConfig],
    ) -> Result<Self> {
        let k = scenario.users();
        let mut links = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let geo = scenario.link_geometry(i, j)?;
                links.push(array_channel(
                    &geo,
                    &tx_cfgs[i],
                    &rx_cfgs[j],
                    &scenario.antenna_offsets,
                    scenario.wavenumber,
                ));
            }
        }
        Ok(Self { users: k, links })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, tx: usize, rx: usize) -> &PolarizationChannel {
        &self.links[tx * self.users + rx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PolarizationChannel> {
        self.links.iter()
    }
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MU_0: f64 = 4.0 * PI * 1e-7;

/// Loop-antenna current producing the same far field as a magnetic dipole
/// of current `magnetic_current`, from `I_m λ/2 = j π a (2πf)² μ₀ I_l`.
/// The result lags the magnetic current by 90°.
pub fn loop_current_equivalent(magnetic_current: f64, radius: f64, frequency: f64) -> Complex64 {
    assert!(
        radius > 0.0 && frequency > 0.0,
        "radius and frequency must be positive"
    );
    let wavelength = SPEED_OF_LIGHT / frequency;
    let omega = 2.0 * PI * frequency;
    let denom = Complex64::new(0.0, PI * radius * omega * omega * MU_0);
    Complex64::new(magnetic_current * wavelength / 2.0, 0.0) / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, singular_values, RANK_TOL};
    use approx::assert_abs_diff_eq;
    use DipoleComponent::*;

    fn link(angle: f64) -> LinkGeometry {
        LinkGeometry {
            tx: 0,
            rx: 1,
            angle,
            distance: 1.0,
            attenuation: 1.0,
        }
    }

    fn set(c: &[DipoleComponent]) -> ComponentSet {
        ComponentSet::new(c.to_vec()).unwrap()
    }

    #[test]
    fn azimuth_patterns_of_z_dipoles() {
        for phi in [0.0, 1.0, 4.0] {
            assert_eq!(pattern_3d(Ez, FRAC_PI_2, phi), (1.0, 0.0));
            assert_eq!(pattern_3d(Mz, FRAC_PI_2, phi), (0.0, -1.0));
        }
        let (t, p) = pattern_3d(Ex, FRAC_PI_2, FRAC_PI_2);
        assert_abs_diff_eq!(t, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-16);
    }

    #[test]
    fn full_rows_at_zero() {
        let rows = azimuth_rows(&DipoleConfig::fixed(ComponentSet::full()), 0.0);
        let want_v = [0.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let want_h = [0.0, -1.0, 0.0, 0.0, 0.0, -1.0];
        for k in 0..6 {
            assert_abs_diff_eq!(rows.vertical[k], want_v[k], epsilon = 1e-15);
            assert_abs_diff_eq!(rows.horizontal[k], want_h[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn four_component_rows_restrict_full_rows() {
        let phi = 0.83;
        let rows = azimuth_rows(&DipoleConfig::fixed(set(&[Ex, Ey, Mx, My])), phi);
        let (s, c) = phi.sin_cos();
        for (got, want) in rows.vertical.iter().zip([0.0, 0.0, s, -c]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        for (got, want) in rows.horizontal.iter().zip([s, -c, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn rotation_shifts_angle() {
        let cfg = set(&[Ex, Mx]);
        let a = azimuth_rows(&DipoleConfig::rotated(cfg.clone(), 0.4), 1.3);
        let b = azimuth_rows(&DipoleConfig::fixed(cfg), 0.9);
        for k in 0..2 {
            assert_abs_diff_eq!(a.vertical[k], b.vertical[k], epsilon = 1e-15);
            assert_abs_diff_eq!(a.horizontal[k], b.horizontal[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn full_channel_rank_two_symmetric() {
        let cfg = DipoleConfig::fixed(ComponentSet::full());
        let h = single_antenna_channel(&link(0.7), &cfg, &cfg, 3.0).matrix;
        assert_eq!(numerical_rank(&h, RANK_TOL), 2);
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn four_component_channel_is_block_diagonal() {
        let phi: f64 = FRAC_PI_2;
        let cfg = DipoleConfig::fixed(set(&[Ex, Ey, Mx, My]));
        let h = single_antenna_channel(&link(phi), &cfg, &cfg, 0.0).matrix;
        // A(π/2) = [[1, 0], [0, 0]] on both diagonal blocks
        let want = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert_abs_diff_eq!(h[(r, c)].re, want[r][c], epsilon = 1e-15);
                assert_abs_diff_eq!(h[(r, c)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn electric_only_link_is_rank_one() {
        let cfg = DipoleConfig::fixed(set(&[Ex, Ey]));
        let h = single_antenna_channel(&link(2.1), &cfg, &cfg, 1.0).matrix;
        assert_eq!(numerical_rank(&h, RANK_TOL), 1);
    }

    #[test]
    fn array_with_zero_offsets_tiles() {
        let cfg = DipoleConfig::fixed(ComponentSet::full());
        let single = single_antenna_channel(&link(0.3), &cfg, &cfg, 5.0).matrix;
        let arr = array_channel(&link(0.3), &cfg, &cfg, &[[0.0, 0.0], [0.0, 0.0]], 5.0).matrix;
        assert_eq!(arr.shape(), (12, 12));
        for br in 0..2 {
            for bc in 0..2 {
                assert_eq!(arr.view((6 * br, 6 * bc), (6, 6)), single);
            }
        }
        let s = singular_values(&arr);
        assert!(s[2] <= 1e-8 * s[0]);
    }

    #[test]
    fn loop_current_zero_and_linearity() {
        assert_eq!(loop_current_equivalent(0.0, 0.01, 2e9).norm(), 0.0);
        let a = loop_current_equivalent(1.0, 0.01, 2e9);
        let b = loop_current_equivalent(1.0, 0.02, 2e9);
        assert_abs_diff_eq!(a.norm() / b.norm(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.arg(), -FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn component_tokens_round_trip() {
        let s = ComponentSet::parse("ex, MY mz").unwrap();
        assert_eq!(s.as_slice(), &[Ex, My, Mz]);
        assert_eq!(ComponentSet::parse(&s.tokens()).unwrap(), s);
        assert!(ComponentSet::parse("ex ex").is_err());
        assert!(ComponentSet::parse("").is_err());
        assert!(ComponentSet::parse("ew").is_err());
        assert_eq!(ComponentSet::all_subsets().len(), 63);
    }
}
