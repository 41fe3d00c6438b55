//! TOML scenario files.
//!
//! ```toml
//! k = 3
//! m = 1
//! scheme = "fixed-zf"          # or "optimal-placement"
//! components = "ex ey mx my"   # or a [components] table with tx/rx lists
//!
//! [placement]
//! seed = 7
//! min_angle_sep = 0.05
//! ```
//!
//! A `[placement]` table with `tx` and `rx` coordinate lists (and optionally
//! `offsets`) fixes the nodes explicitly; otherwise nodes are drawn at
//! random from `seed`. Everything except `k` has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    linear_array_offsets, random_generic_scenario, Point, Scenario, DEFAULT_MIN_ANGLE_SEP,
    DEFAULT_WAVENUMBER,
};
use crate::polarization::ComponentSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    FixedZf,
    OptimalPlacement,
}

impl Scheme {
    pub fn token(self) -> &'static str {
        match self {
            Scheme::FixedZf => "fixed-zf",
            Scheme::OptimalPlacement => "optimal-placement",
        }
    }

    pub fn from_token(t: &str) -> Option<Self> {
        [Scheme::FixedZf, Scheme::OptimalPlacement]
            .into_iter()
            .find(|s| s.token() == t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Components {
    Uniform(String),
    PerNode(PerNodeComponents),
}

impl Default for Components {
    fn default() -> Self {
        Components::Uniform(ComponentSet::full().tokens())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerNodeComponents {
    pub tx: Vec<String>,
    pub rx: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_angle_sep: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<Point>>,
}

impl Placement {
    pub fn is_explicit(&self) -> bool {
        self.tx.is_some() || self.rx.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_wavenumber")]
    pub wavenumber: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_snr_grid")]
    pub snr_grid: Vec<f64>,
    #[serde(default)]
    pub components: Components,
    #[serde(default)]
    pub placement: Placement,
}

fn default_m() -> usize {
    1
}

fn default_wavenumber() -> f64 {
    DEFAULT_WAVENUMBER
}

/// Decades from 10⁰ to 10¹⁶.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=16).map(|e| 10f64.powi(e)).collect()
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidScenario {
        field,
        reason: reason.into(),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioFile {
    /// Minimal file: `k` users with every other key at its default.
    pub fn with_users(k: usize) -> Self {
        Self {
            k,
            m: default_m(),
            wavenumber: default_wavenumber(),
            scheme: Scheme::default(),
            snr_grid: default_snr_grid(),
            components: Components::default(),
            placement: Placement::default(),
        }
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().trim().to_string(),
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k", "at least one user pair is required"));
        }
        if self.m == 0 {
            return Err(invalid("m", "at least one antenna per node is required"));
        }
        if !(self.wavenumber.is_finite() && self.wavenumber > 0.0) {
            return Err(invalid(
                "wavenumber",
                format!("must be positive and finite, got {}", self.wavenumber),
            ));
        }
        if self.snr_grid.is_empty() {
            return Err(invalid("snr_grid", "needs at least one value"));
        }
        if self.snr_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("snr_grid", "values must be positive and finite"));
        }
        if self.snr_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("snr_grid", "values must be strictly increasing"));
        }
        self.component_sets()?;

        let p = &self.placement;
        if let Some(sep) = p.min_angle_sep {
            if p.is_explicit() {
                return Err(invalid(
                    "placement.min_angle_sep",
                    "only applies to random placement",
                ));
            }
            if !(sep.is_finite() && sep > 0.0) {
                return Err(invalid(
                    "placement.min_angle_sep",
                    format!("must be positive, got {sep}"),
                ));
            }
        }
        if p.is_explicit() {
            let (Some(tx), Some(rx)) = (&p.tx, &p.rx) else {
                let missing = if p.tx.is_none() {
                    "placement.tx"
                } else {
                    "placement.rx"
                };
                return Err(invalid(missing, "explicit placement needs both tx and rx"));
            };
            if tx.len() != self.k {
                return Err(invalid(
                    "placement.tx",
                    format!("expected {} points, got {}", self.k, tx.len()),
                ));
            }
            if rx.len() != self.k {
                return Err(invalid(
                    "placement.rx",
                    format!("expected {} points, got {}", self.k, rx.len()),
                ));
            }
        } else if p.offsets.is_some() {
            return Err(invalid(
                "placement.offsets",
                "only applies to explicit placement",
            ));
        }
        if let Some(offsets) = &p.offsets {
            if offsets.len() != self.m {
                return Err(invalid(
                    "placement.offsets",
                    format!(
                        "expected {} offsets (one per antenna), got {}",
                        self.m,
                        offsets.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Per-node transmit and receive component sets.
    pub fn component_sets(&self) -> Result<(Vec<ComponentSet>, Vec<ComponentSet>)> {
        let parse = |field: &'static str, text: &str| {
            ComponentSet::parse(text).map_err(|e| invalid(field, e.to_string()))
        };
        match &self.components {
            Components::Uniform(text) => {
                let set = parse("components", text)?;
                Ok((vec![set.clone(); self.k], vec![set; self.k]))
            }
            Components::PerNode(per) => {
                if per.tx.len() != self.k {
                    return Err(invalid(
                        "components.tx",
                        format!("expected {} lists, got {}", self.k, per.tx.len()),
                    ));
                }
                if per.rx.len() != self.k {
                    return Err(invalid(
                        "components.rx",
                        format!("expected {} lists, got {}", self.k, per.rx.len()),
                    ));
                }
                let tx = per
                    .tx
                    .iter()
                    .map(|t| parse("components.tx", t))
                    .collect::<Result<_>>()?;
                let rx = per
                    .rx
                    .iter()
                    .map(|t| parse("components.rx", t))
                    .collect::<Result<_>>()?;
                Ok((tx, rx))
            }
        }
    }

    /// Builds the scenario, drawing random nodes when placement is not explicit.
    pub fn to_scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let (tx_components, rx_components) = self.component_sets()?;
        let p = &self.placement;
        let mut scenario = if p.is_explicit() {
            Scenario {
                tx_positions: p.tx.clone().unwrap_or_default(),
                rx_positions: p.rx.clone().unwrap_or_default(),
                antenna_offsets: p
                    .offsets
                    .clone()
                    .unwrap_or_else(|| linear_array_offsets(self.m, self.wavenumber)),
                wavenumber: self.wavenumber,
                tx_components: Vec::new(),
                rx_components: Vec::new(),
                seed: p.seed,
            }
        } else {
            let sep = p.min_angle_sep.unwrap_or(DEFAULT_MIN_ANGLE_SEP);
            let mut s = random_generic_scenario(self.k, self.m, p.seed, sep)?;
            s.wavenumber = self.wavenumber;
            s.antenna_offsets = linear_array_offsets(self.m, self.wavenumber);
            s
        };
        scenario.tx_components = tx_components;
        scenario.rx_components = rx_components;
        scenario.validate()?;
        Ok(scenario)
    }

    /// File with explicit placement that reproduces `scenario` exactly.
    pub fn from_scenario(scenario: &Scenario, scheme: Scheme, snr_grid: Vec<f64>) -> Self {
        let components = match scenario.uniform_components() {
            Some(set) => Components::Uniform(set.tokens()),
            None => Components::PerNode(PerNodeComponents {
                tx: scenario.tx_components.iter().map(|c| c.tokens()).collect(),
                rx: scenario.rx_components.iter().map(|c| c.tokens()).collect(),
            }),
        };
        Self {
            k: scenario.users(),
            m: scenario.antennas(),
            wavenumber: scenario.wavenumber,
            scheme,
            snr_grid,
            components,
            placement: Placement {
                seed: scenario.seed,
                min_angle_sep: None,
                tx: Some(scenario.tx_positions.clone()),
                rx: Some(scenario.rx_positions.clone()),
                offsets: Some(scenario.antenna_offsets.clone()),
            },
        }
    }
}

/// Serializes `scenario` as a scenario file with explicit placement.
pub fn emit(scenario: &Scenario) -> String {
    ScenarioFile::from_scenario(scenario, Scheme::default(), default_snr_grid()).to_toml()
}

/// Parses a scenario file and builds its scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    ScenarioFile::parse(text)?.to_scenario()
}
