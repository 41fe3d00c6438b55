//! Planar node placement and per-link geometry.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::polarization::{ComponentSet, DipoleConfig};

/// Side of the square placement area for random scenarios, meters.
pub const PLACEMENT_BOX: f64 = 100.0;
/// 2 GHz carrier (λ = 0.15 m).
pub const DEFAULT_WAVENUMBER: f64 = TAU / 0.15;
pub const DEFAULT_MIN_ANGLE_SEP: f64 = 0.05;
pub const RESAMPLE_BUDGET: usize = 1000;
/// Candidate draws per node inside one placement attempt.
pub const CANDIDATES_PER_NODE: usize = 20_000;
/// Random transmitters and receivers are kept at least this far apart, meters.
pub const MIN_LINK_DISTANCE: f64 = 1.0;
/// Element spacing of the default linear array, in wavelengths. Narrow
/// arrays resolve nearby directions poorly and leave tiny direct gains
/// once many links are nulled.
pub const ARRAY_SPACING_WAVELENGTHS: f64 = 5.0;
/// |sin| below this is treated as an exact angle coincidence.
const SIN_ZERO: f64 = 1e-12;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tx_positions: Vec<Point>,
    pub rx_positions: Vec<Point>,
    /// Per-antenna offsets shared by every node; `antenna_offsets[0]` is the origin.
    pub antenna_offsets: Vec<Point>,
    pub wavenumber: f64,
    pub tx_components: Vec<ComponentSet>,
    pub rx_components: Vec<ComponentSet>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub tx: usize,
    pub rx: usize,
    /// Direction of propagation from the transmitter to the receiver, in [0, 2π).
    pub angle: f64,
    pub distance: f64,
    /// Field amplitude decay, `1 / distance`.
    pub attenuation: f64,
}

impl Scenario {
    /// Scenario with every node using `components`.
    pub fn new(
        tx_positions: Vec<Point>,
        rx_positions: Vec<Point>,
        antenna_offsets: Vec<Point>,
        wavenumber: f64,
        components: ComponentSet,
    ) -> Result<Self> {
        let k = tx_positions.len();
        let s = Self {
            tx_positions,
            rx_positions,
            antenna_offsets,
            wavenumber,
            tx_components: vec![components.clone(); k],
            rx_components: vec![components; k],
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.tx_positions.len();
        let invalid = |field, reason: String| Err(Error::InvalidScenario { field, reason });
        if k == 0 {
            return invalid("k", "at least one user pair is required".into());
        }
        if self.rx_positions.len() != k {
            return invalid(
                "rx_positions",
                format!("expected {k} receivers, got {}", self.rx_positions.len()),
            );
        }
        if self.antenna_offsets.is_empty() {
            return invalid("antenna_offsets", "at least one antenna is required".into());
        }
        if self.antenna_offsets[0] != [0.0, 0.0] {
            return invalid(
                "antenna_offsets",
                "the first offset must be the origin".into(),
            );
        }
        if !(self.wavenumber.is_finite() && self.wavenumber > 0.0) {
            return invalid(
                "wavenumber",
                format!("must be positive, got {}", self.wavenumber),
            );
        }
        let finite = |p: &Point| p[0].is_finite() && p[1].is_finite();
        if !self.tx_positions.iter().all(finite) {
            return invalid("tx_positions", "coordinates must be finite".into());
        }
        if !self.rx_positions.iter().all(finite) {
            return invalid("rx_positions", "coordinates must be finite".into());
        }
        if !self.antenna_offsets.iter().all(finite) {
            return invalid("antenna_offsets", "coordinates must be finite".into());
        }
        if self.tx_components.len() != k || self.rx_components.len() != k {
            return invalid(
                "components",
                format!("expected {k} per-node component lists"),
            );
        }
        for (i, tx) in self.tx_positions.iter().enumerate() {
            for (j, rx) in self.rx_positions.iter().enumerate() {
                if tx == rx {
                    return Err(Error::DegenerateGeometry { tx: i, rx: j });
                }
            }
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn antennas(&self) -> usize {
        self.antenna_offsets.len()
    }

    pub fn tx_config(&self, i: usize) -> DipoleConfig {
        DipoleConfig::fixed(self.tx_components[i].clone())
    }

    pub fn rx_config(&self, j: usize) -> DipoleConfig {
        DipoleConfig::fixed(self.rx_components[j].clone())
    }

    /// Antenna-space dimension `M · c` at transmitter `i`.
    pub fn tx_dim(&self, i: usize) -> usize {
        self.antennas() * self.tx_components[i].len()
    }

    pub fn rx_dim(&self, j: usize) -> usize {
        self.antennas() * self.rx_components[j].len()
    }

    /// Same `components` at every node.
    pub fn uniform_components(&self) -> Option<&ComponentSet> {
        let first = &self.tx_components[0];
        self.tx_components
            .iter()
            .chain(&self.rx_components)
            .all(|c| c == first)
            .then_some(first)
    }

    pub fn with_components(mut self, components: &ComponentSet) -> Self {
        let k = self.users();
        self.tx_components = vec![components.clone(); k];
        self.rx_components = vec![components.clone(); k];
        self
    }

    /// Replaces the array with the default uniform linear array of `m` antennas.
    pub fn with_antennas(mut self, m: usize) -> Self {
        self.antenna_offsets = linear_array_offsets(m, self.wavenumber);
        self
    }

    /// The first `k` user pairs.
    pub fn prefix(&self, k: usize) -> Self {
        Self {
            tx_positions: self.tx_positions[..k].to_vec(),
            rx_positions: self.rx_positions[..k].to_vec(),
            antenna_offsets: self.antenna_offsets.clone(),
            wavenumber: self.wavenumber,
            tx_components: self.tx_components[..k].to_vec(),
            rx_components: self.rx_components[..k].to_vec(),
            seed: self.seed,
        }
    }

    /// Scales node coordinates (not antenna offsets) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let sc = |p: &Point| [p[0] * factor, p[1] * factor];
        Self {
            tx_positions: self.tx_positions.iter().map(sc).collect(),
            rx_positions: self.rx_positions.iter().map(sc).collect(),
            ..self.clone()
        }
    }

    /// Rotates node coordinates about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let rot = |p: &Point| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        Self {
            tx_positions: self.tx_positions.iter().map(rot).collect(),
            rx_positions: self.rx_positions.iter().map(rot).collect(),
            ..self.clone()
        }
    }

    pub fn link_geometry(&self, i: usize, j: usize) -> Result<LinkGeometry> {
        link_geometry(self, i, j)
    }
}

pub fn linear_array_offsets(m: usize, wavenumber: f64) -> Vec<Point> {
    let spacing = ARRAY_SPACING_WAVELENGTHS * TAU / wavenumber;
    (0..m).map(|a| [a as f64 * spacing, 0.0]).collect()
}

pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn ray(from: Point, to: Point) -> (f64, f64) {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    (normalize_angle(dy.atan2(dx)), dx.hypot(dy))
}

pub fn link_geometry(scenario: &Scenario, i: usize, j: usize) -> Result<LinkGeometry> {
    let k = scenario.users();
    if i >= k {
        return Err(Error::IndexOutOfRange {
            what: "transmitter",
            index: i,
            len: k,
        });
    }
    if j >= k {
        return Err(Error::IndexOutOfRange {
            what: "receiver",
            index: j,
            len: k,
        });
    }
    let (angle, distance) = ray(scenario.tx_positions[i], scenario.rx_positions[j]);
    if distance == 0.0 {
        return Err(Error::DegenerateGeometry { tx: i, rx: j });
    }
    Ok(LinkGeometry {
        tx: i,
        rx: j,
        angle,
        distance,
        attenuation: 1.0 / distance,
    })
}

/// Smallest |sin(a − b)| over distinct pairs of link angles incident to any
/// node, mapped to radians by arcsine. 0 means two links leave or enter a
/// node along the same line; π/2 when no node has two incident links.
pub fn genericity_margin(scenario: &Scenario) -> f64 {
    let k = scenario.users();
    let angles: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| ray(scenario.tx_positions[i], scenario.rx_positions[j]).0)
                .collect()
        })
        .collect();
    margin_from_angles(&angles)
}

/// Genericity margin from a `K × K` table of link angles `angles[tx][rx]`.
pub fn margin_from_angles(angles: &[Vec<f64>]) -> f64 {
    let k = angles.len();
    let mut worst = 1.0f64;
    for i in 0..k {
        worst = worst.min(min_pair_sine(&angles[i]));
        let column: Vec<f64> = (0..k).map(|t| angles[t][i]).collect();
        worst = worst.min(min_pair_sine(&column));
    }
    if worst < SIN_ZERO {
        0.0
    } else if worst >= 1.0 {
        FRAC_PI_2
    } else {
        worst.asin()
    }
}

fn min_pair_sine(angles: &[f64]) -> f64 {
    let mut worst = 1.0f64;
    for (a, &x) in angles.iter().enumerate() {
        for &y in &angles[a + 1..] {
            worst = worst.min((x - y).sin().abs());
        }
    }
    worst
}

/// Random placement in the `PLACEMENT_BOX` square whose genericity margin
/// is at least `min_angle_sep`, using all six dipole components at every
/// node and the default linear array of `antennas` elements.
///
/// Nodes are placed one at a time (tx₀, rx₀, tx₁, rx₁, …); a candidate is
/// kept only if every angle pair it creates respects the separation. If a
/// node exhausts its candidate draws the attempt starts over.
pub fn random_generic_scenario(
    users: usize,
    antennas: usize,
    seed: u64,
    min_angle_sep: f64,
) -> Result<Scenario> {
    if users == 0 {
        return Err(Error::InvalidScenario {
            field: "k",
            reason: "must be positive".into(),
        });
    }
    if antennas == 0 {
        return Err(Error::InvalidScenario {
            field: "m",
            reason: "must be positive".into(),
        });
    }
    if !(min_angle_sep > 0.0 && min_angle_sep <= FRAC_PI_2) {
        return Err(Error::InvalidScenario {
            field: "min_angle_sep",
            reason: format!("must lie in (0, π/2], got {min_angle_sep}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sine = min_angle_sep.sin();
    for _ in 0..RESAMPLE_BUDGET {
        if let Some((tx, rx)) = try_place(users, min_sine, &mut rng) {
            let full = ComponentSet::full();
            let wavenumber = DEFAULT_WAVENUMBER;
            let mut s = Scenario::new(
                tx,
                rx,
                linear_array_offsets(antennas, wavenumber),
                wavenumber,
                full,
            )?;
            s.seed = seed;
            debug_assert!(genericity_margin(&s) >= min_angle_sep * (1.0 - 1e-12));
            return Ok(s);
        }
    }
    Err(Error::NonGenericGeometry {
        attempts: RESAMPLE_BUDGET,
        min_angle_sep,
    })
}

fn try_place(
    users: usize,
    min_sine: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<Point>, Vec<Point>)> {
    let mut tx: Vec<Point> = Vec::with_capacity(users);
    let mut rx: Vec<Point> = Vec::with_capacity(users);
    // incident link angles per node
    let mut tx_angles: Vec<Vec<f64>> = Vec::with_capacity(users);
    let mut rx_angles: Vec<Vec<f64>> = Vec::with_capacity(users);

    for step in 0..2 * users {
        let placing_tx = step % 2 == 0;
        let mut accepted = None;
        for _ in 0..CANDIDATES_PER_NODE {
            let p = [
                rng.random::<f64>() * PLACEMENT_BOX,
                rng.random::<f64>() * PLACEMENT_BOX,
            ];
            let (others, other_angles) = if placing_tx {
                (&rx, &rx_angles)
            } else {
                (&tx, &tx_angles)
            };
            let mut own = Vec::with_capacity(others.len());
            let mut ok = true;
            for (o, &q) in others.iter().enumerate() {
                let (ang, dist) = if placing_tx { ray(p, q) } else { ray(q, p) };
                if dist < MIN_LINK_DISTANCE
                    || own.iter().any(|&a: &f64| (a - ang).sin().abs() < min_sine)
                    || other_angles[o]
                        .iter()
                        .any(|&a: &f64| (a - ang).sin().abs() < min_sine)
                {
                    ok = false;
                    break;
                }
                own.push(ang);
            }
            if ok {
                accepted = Some((p, own));
                break;
            }
        }
        let (p, own) = accepted?;
        if placing_tx {
            for (o, &a) in own.iter().enumerate() {
                rx_angles[o].push(a);
            }
            tx.push(p);
            tx_angles.push(own);
        } else {
            for (o, &a) in own.iter().enumerate() {
                tx_angles[o].push(a);
            }
            rx.push(p);
            rx_angles.push(own);
        }
    }
    Some((tx, rx))
}
