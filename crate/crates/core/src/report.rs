//! CSV rows summarizing one design on one scenario.

use crate::scenario_file::Scheme;

pub const RESULT_HEADER: &str =
    "scenario_id,k,m,components,scheme,leakage_max,dof,gamma_hat,genericity_margin,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scenario_id: String,
    pub users: usize,
    pub antennas: usize,
    /// Number of dipole components per node (the largest, if nodes differ).
    pub components: usize,
    pub scheme: Scheme,
    pub leakage_max: f64,
    pub dof: usize,
    pub gamma_hat: f64,
    pub genericity_margin: f64,
    pub seed: u64,
}

impl ResultRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e},{},{},{},{}",
            csv_field(&self.scenario_id),
            self.users,
            self.antennas,
            self.components,
            self.scheme.token(),
            self.leakage_max,
            self.dof,
            self.gamma_hat,
            self.genericity_margin,
            self.seed
        )
    }
}

/// Header followed by one row per record.
pub fn write_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
