//! Plain-text dump of a designed scheme that can be reloaded and
//! re-certified.
//!
//! ```text
//! keyhole-design 1
//! scheme fixed-zf
//! leakage_max 3.1e-16
//! scenario 12
//! <12 lines of scenario file>
//! assignment 6 capacity=2
//! 0 1 tx
//! ...
//! rotation tx 0 0
//! rotation rx 0 0
//! precoder 0 null-space 6x2 nulled=1,2 null_dim=2
//! <one line per column: "re+imj" tokens>
//! combiner 0 ...
//! ```
//!
//! Matrices are stored column-major, one column per line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::linalg::{orthonormality_defect, CMatrix};
use crate::polarization::{ChannelSet, DipoleConfig};
use crate::scenario_file::{ScenarioFile, Scheme};
use crate::zfdesign::{
    recheck_leakage_on, Beamformer, BeamformerOrigin, LeakageCheck, NullingAssignment, NullingSide,
    OptimalPlacement, ZfDesign,
};

const MAGIC: &str = "keyhole-design 1";
/// Column orthonormality defect a verified beamformer may carry.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DesignDump {
    /// Scenario with explicit placement.
    pub scenario: ScenarioFile,
    pub scheme: Scheme,
    /// Leakage recorded when the design was produced.
    pub leakage_max: f64,
    pub assignment: NullingAssignment,
    pub tx_rotations: Vec<f64>,
    pub rx_rotations: Vec<f64>,
    pub precoders: Vec<Beamformer>,
    pub combiners: Vec<Beamformer>,
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub check: LeakageCheck,
    /// Worst column orthonormality defect over all beamformers.
    pub orthonormality_defect: f64,
}

impl Verification {
    pub fn is_certified(&self) -> bool {
        self.check.is_certified() && self.orthonormality_defect <= ORTHONORMALITY_TOL
    }
}

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{sign}{:e}j", z.re, z.im.abs())
}

pub fn parse_complex(token: &str) -> Option<Complex64> {
    let body = token.strip_suffix('j')?;
    let bytes = body.as_bytes();
    // the imaginary sign is the last +/- not at the start and not after an exponent marker
    let split = (1..bytes.len()).rev().find(|&i| {
        (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
    })?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].parse().ok()?;
    (re.is_finite() && im.is_finite()).then(|| Complex64::new(re, im))
}

impl DesignDump {
    pub fn from_design(scenario: &Scenario, snr_grid: Vec<f64>, design: &ZfDesign) -> Self {
        let k = scenario.users();
        Self {
            scenario: ScenarioFile::from_scenario(scenario, Scheme::FixedZf, snr_grid),
            scheme: Scheme::FixedZf,
            leakage_max: design.leakage_max,
            assignment: design.assignment.clone(),
            tx_rotations: vec![0.0; k],
            rx_rotations: vec![0.0; k],
            precoders: design.precoders.clone(),
            combiners: design.combiners.clone(),
        }
    }

    pub fn from_placement(
        scenario: &Scenario,
        snr_grid: Vec<f64>,
        placement: &OptimalPlacement,
    ) -> Result<Self> {
        let identity = |dim: usize, nulled: Vec<usize>| Beamformer {
            matrix: CMatrix::identity(dim, dim),
            origin: BeamformerOrigin::Rotation,
            nulled,
            null_dim: dim,
        };
        let k = scenario.users();
        let precoders = (0..k)
            .map(|i| identity(scenario.tx_dim(i), placement.assignment.tx_nulls(i)))
            .collect();
        let combiners = (0..k)
            .map(|i| identity(scenario.rx_dim(i), placement.assignment.rx_nulls(i)))
            .collect();
        let mut dump = Self {
            scenario: ScenarioFile::from_scenario(scenario, Scheme::OptimalPlacement, snr_grid),
            scheme: Scheme::OptimalPlacement,
            leakage_max: 0.0,
            assignment: placement.assignment.clone(),
            tx_rotations: placement
                .tx_configs
                .iter()
                .map(|c| c.azimuth_rotation)
                .collect(),
            rx_rotations: placement
                .rx_configs
                .iter()
                .map(|c| c.azimuth_rotation)
                .collect(),
            precoders,
            combiners,
        };
        dump.leakage_max = dump.verify()?.check.leakage_max;
        Ok(dump)
    }

    /// Recomputes the certificate from the stored scenario and matrices.
    pub fn verify(&self) -> Result<Verification> {
        let scenario = self.scenario.to_scenario()?;
        let k = scenario.users();
        if self.tx_rotations.len() != k || self.rx_rotations.len() != k {
            return Err(Error::InvalidScenario {
                field: "rotation",
                reason: format!("expected {k} rotations per side"),
            });
        }
        let tx: Vec<DipoleConfig> = (0..k)
            .map(|i| DipoleConfig::rotated(scenario.tx_components[i].clone(), self.tx_rotations[i]))
            .collect();
        let rx: Vec<DipoleConfig> = (0..k)
            .map(|i| DipoleConfig::rotated(scenario.rx_components[i].clone(), self.rx_rotations[i]))
            .collect();
        let channels = ChannelSet::build_with(&scenario, &tx, &rx)?;
        let check = recheck_leakage_on(
            &scenario,
            &channels,
            &self.assignment,
            &self.precoders,
            &self.combiners,
        )?;
        let orthonormality_defect = self
            .precoders
            .iter()
            .chain(&self.combiners)
            .map(|b| orthonormality_defect(&b.matrix))
            .fold(0.0, f64::max);
        Ok(Verification {
            check,
            orthonormality_defect,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let scenario = self.scenario.to_toml();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "scheme {}", self.scheme.token());
        let _ = writeln!(out, "leakage_max {:e}", self.leakage_max);
        let _ = writeln!(out, "scenario {}", scenario.lines().count());
        out.push_str(&scenario);
        if !scenario.ends_with('\n') {
            out.push('\n');
        }
        let links: Vec<_> = self.assignment.links().collect();
        let _ = writeln!(
            out,
            "assignment {} capacity={}",
            links.len(),
            self.assignment.capacity()
        );
        for ((i, j), side) in links {
            let _ = writeln!(out, "{i} {j} {}", side.token());
        }
        for (side, rots) in [("tx", &self.tx_rotations), ("rx", &self.rx_rotations)] {
            for (i, r) in rots.iter().enumerate() {
                let _ = writeln!(out, "rotation {side} {i} {r:e}");
            }
        }
        for (role, list) in [("precoder", &self.precoders), ("combiner", &self.combiners)] {
            for (i, b) in list.iter().enumerate() {
                let nulled: Vec<String> = b.nulled.iter().map(|n| n.to_string()).collect();
                let _ = writeln!(
                    out,
                    "{role} {i} {} {}x{} nulled={} null_dim={}",
                    b.origin.token(),
                    b.matrix.nrows(),
                    b.matrix.ncols(),
                    nulled.join(","),
                    b.null_dim
                );
                for col in b.matrix.column_iter() {
                    let tokens: Vec<String> = col.iter().map(|z| format_complex(*z)).collect();
                    let _ = writeln!(out, "{}", tokens.join(" "));
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        };
        let (n, first) = lines.next_line()?;
        if first.trim() != MAGIC {
            return Err(Error::Parse {
                line: n,
                message: format!("expected `{MAGIC}` header"),
            });
        }
        let (n, line) = lines.next_line()?;
        let scheme = line
            .strip_prefix("scheme ")
            .and_then(|t| Scheme::from_token(t.trim()))
            .ok_or_else(|| Error::Parse {
                line: n,
                message: "expected `scheme <fixed-zf|optimal-placement>`".into(),
            })?;
        let (n, line) = lines.next_line()?;
        let leakage_max = line
            .strip_prefix("leakage_max ")
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Parse {
                line: n,
                message: "expected `leakage_max <value>`".into(),
            })?;
        let (n, line) = lines.next_line()?;
        let count: usize = line
            .strip_prefix("scenario ")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: n,
                message: "expected `scenario <line count>`".into(),
            })?;
        let scenario_start = n + 1;
        let mut body = String::new();
        for _ in 0..count {
            let (_, l) = lines.next_line()?;
            body.push_str(l);
            body.push('\n');
        }
        let scenario = ScenarioFile::parse(&body).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line: line + scenario_start - 1,
                message,
            },
            other => other,
        })?;
        let k = scenario.k;

        let (n, line) = lines.next_line()?;
        let (count, capacity) = line
            .strip_prefix("assignment ")
            .and_then(|t| t.split_once(" capacity="))
            .and_then(|(a, b)| {
                Some((
                    a.trim().parse::<usize>().ok()?,
                    b.trim().parse::<usize>().ok()?,
                ))
            })
            .ok_or_else(|| Error::Parse {
                line: n,
                message: "expected `assignment <link count> capacity=<n>`".into(),
            })?;
        let mut links = BTreeMap::new();
        for _ in 0..count {
            let (n, l) = lines.next_line()?;
            let f: Vec<&str> = l.split_whitespace().collect();
            let parsed = match f.as_slice() {
                [i, j, side] => match (
                    i.parse::<usize>(),
                    j.parse::<usize>(),
                    NullingSide::from_token(side),
                ) {
                    (Ok(i), Ok(j), Some(side)) if i < k && j < k && i != j => Some(((i, j), side)),
                    _ => None,
                },
                _ => None,
            };
            let (key, side) = parsed.ok_or_else(|| Error::Parse {
                line: n,
                message: format!("bad assignment entry `{l}`"),
            })?;
            links.insert(key, side);
        }
        let assignment = NullingAssignment::from_links(k, capacity, links);

        let mut tx_rotations = vec![0.0; k];
        let mut rx_rotations = vec![0.0; k];
        while let Some(l) = lines.peek().filter(|l| l.starts_with("rotation ")) {
            let l = l.to_string();
            let (n, _) = lines.next_line()?;
            let f: Vec<&str> = l.split_whitespace().collect();
            let target = match f.as_slice() {
                ["rotation", side, i, r] => match (i.parse::<usize>(), r.parse::<f64>()) {
                    (Ok(i), Ok(r)) if i < k && r.is_finite() => match *side {
                        "tx" => Some((&mut tx_rotations, i, r)),
                        "rx" => Some((&mut rx_rotations, i, r)),
                        _ => None,
                    },
                    _ => None,
                },
                _ => None,
            };
            let (v, i, r) = target.ok_or_else(|| Error::Parse {
                line: n,
                message: format!("bad rotation `{l}`"),
            })?;
            v[i] = r;
        }

        let precoders = parse_beamformers(&mut lines, "precoder", k)?;
        let combiners = parse_beamformers(&mut lines, "combiner", k)?;
        if let Some((n, l)) = lines.next_nonempty() {
            return Err(Error::Parse {
                line: n,
                message: format!("unexpected trailing content `{l}`"),
            });
        }
        Ok(Self {
            scenario,
            scheme,
            leakage_max,
            assignment,
            tx_rotations,
            rx_rotations,
            precoders,
            combiners,
        })
    }
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: std::iter::Peekable<I>,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::Parse {
                line: self.last + 1,
                message: "unexpected end of file".into(),
            }),
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|(_, l)| *l)
    }

    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l))
    }
}

fn parse_beamformers<'a, I: Iterator<Item = (usize, &'a str)>>(
    lines: &mut Lines<'a, I>,
    role: &str,
    k: usize,
) -> Result<Vec<Beamformer>> {
    let mut out = Vec::with_capacity(k);
    for idx in 0..k {
        let (n, header) = lines.next_line()?;
        let bad = |msg: String| Error::Parse {
            line: n,
            message: msg,
        };
        let f: Vec<&str> = header.split_whitespace().collect();
        let [r, i, origin, shape, nulled, null_dim] = f.as_slice() else {
            return Err(bad(format!(
                "expected `{role} <index> <origin> <rows>x<cols> nulled=.. null_dim=..`"
            )));
        };
        if *r != role || i.parse::<usize>().ok() != Some(idx) {
            return Err(bad(format!("expected {role} {idx}")));
        }
        let origin = BeamformerOrigin::from_token(origin)
            .ok_or_else(|| bad(format!("unknown origin `{origin}`")))?;
        let (rows, cols) = shape
            .split_once('x')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| bad(format!("bad shape `{shape}`")))?;
        let nulled = nulled
            .strip_prefix("nulled=")
            .and_then(|t| {
                t.split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().ok())
                    .collect::<Option<Vec<_>>>()
            })
            .ok_or_else(|| bad(format!("bad nulled list `{nulled}`")))?;
        let null_dim = null_dim
            .strip_prefix("null_dim=")
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| bad(format!("bad null_dim `{null_dim}`")))?;
        let mut matrix = CMatrix::zeros(rows, cols);
        for c in 0..cols {
            let (n, l) = lines.next_line()?;
            let tokens: Vec<&str> = l.split_whitespace().collect();
            if tokens.len() != rows {
                return Err(Error::Parse {
                    line: n,
                    message: format!("expected {rows} entries, got {}", tokens.len()),
                });
            }
            for (r, t) in tokens.iter().enumerate() {
                matrix[(r, c)] = parse_complex(t).ok_or_else(|| Error::Parse {
                    line: n,
                    message: format!("bad complex token `{t}`"),
                })?;
            }
        }
        out.push(Beamformer {
            matrix,
            origin,
            nulled,
            null_dim,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_generic_scenario;
    use crate::scenario_file::default_snr_grid;
    use crate::zfdesign::{assign_nulling, design_zf};

    #[test]
    fn complex_tokens() {
        for z in [
            Complex64::new(1.5, -2.0),
            Complex64::new(-3.25e-17, 4e300),
            Complex64::new(0.0, -0.0),
            Complex64::new(-1.0, 1e-5),
        ] {
            let t = format_complex(z);
            assert_eq!(parse_complex(&t), Some(z), "{t}");
        }
        assert_eq!(parse_complex("1e0"), None);
        assert_eq!(parse_complex("abc+1j"), None);
    }

    #[test]
    fn round_trip_and_verify() {
        let s = random_generic_scenario(3, 1, 4, 0.05).unwrap();
        let d = design_zf(&s, &assign_nulling(3, 1)).unwrap();
        let dump = DesignDump::from_design(&s, default_snr_grid(), &d);
        let text = dump.to_text();
        let back = DesignDump::parse(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert!(back.verify().unwrap().is_certified());
    }

    #[test]
    fn truncated_file_reports_line() {
        let s = random_generic_scenario(2, 1, 1, 0.05).unwrap();
        let d = design_zf(&s, &assign_nulling(2, 1)).unwrap();
        let text = DesignDump::from_design(&s, default_snr_grid(), &d).to_text();
        let cut: String = text
            .lines()
            .take(text.lines().count() - 1)
            .collect::<Vec<_>>()
            .join("\n");
        let err = DesignDump::parse(&cut).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }
}
