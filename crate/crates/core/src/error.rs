use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid scenario: {field}: {reason}")]
    InvalidScenario { field: &'static str, reason: String },

    #[error("degenerate geometry: transmitter {tx} and receiver {rx} are co-located")]
    DegenerateGeometry { tx: usize, rx: usize },

    #[error("index out of range: {what} {index} (have {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error(
        "no generic placement found after {attempts} attempts (min separation {min_angle_sep} rad)"
    )]
    NonGenericGeometry { attempts: usize, min_angle_sep: f64 },

    #[error("invalid dipole configuration: {0}")]
    InvalidComponents(String),

    #[error("null-space dimension {available} is below the {wanted} streams required at {node}")]
    InfeasibleNulling {
        node: String,
        available: usize,
        wanted: usize,
    },

    #[error("nulling assignment is incomplete: {unassigned} cross links unassigned")]
    IncompleteAssignment { unassigned: usize },

    #[error("degenerate directions: angles {a} and {b} coincide modulo pi")]
    DegenerateDirections { a: f64, b: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("snr {0} is not present in the rate curve")]
    MissingSnr(f64),
}
