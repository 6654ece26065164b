use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::check::CheckReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// `Φ(ε)` against the first index where `res_A ≤ ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub eps: f64,
    pub phi: u64,
    pub first_hit: Option<u64>,
    /// `first_hit / Φ(ε)`.
    pub tightness: Option<f64>,
    /// The residual is already below `ε` at the start.
    pub vacuous: bool,
}

/// `Φ′(ε)` and `Φ″(ε)` against the first index where `max_i res_T[i] ≤ ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub eps: f64,
    pub p_threshold: f64,
    pub phi_prime: u64,
    pub phi_double_prime: u64,
    pub first_hit: Option<u64>,
    /// `first_hit / Φ″(ε)`.
    pub tightness: Option<f64>,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiminfRecord {
    pub eps: f64,
    pub m: u64,
    pub delta: u64,
    pub witness: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub index: usize,
    pub label: String,
    pub status: Status,
    /// Set when the instance could not be built or iterated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Factor applied to all lengths of a generated instance to fit the step budget.
    pub scale: f64,
    pub dim: usize,
    pub n_maps: usize,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub k_ceiling: Option<f64>,
    pub n_max: u64,
    /// `‖x_{n_max} − p‖`, a diagnostic only.
    pub final_distance: Option<f64>,
    /// Full descriptor of the instance as iterated.
    pub instance: Option<serde_json::Value>,
    pub rates: Vec<RateRecord>,
    pub individual_rates: Vec<IndividualRecord>,
    pub liminf: Vec<LiminfRecord>,
    pub checks: Vec<CheckReport>,
}

impl InstanceReport {
    pub fn violations(&self) -> u64 {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.check == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub schema_version: u32,
    pub status: Status,
    pub seed: u64,
    pub instance_count: usize,
    pub failed: usize,
    pub instances: Vec<InstanceReport>,
}

impl CertificationReport {
    /// PASS iff every instance passed; an empty campaign passes.
    pub fn aggregate(seed: u64, instances: Vec<InstanceReport>) -> Self {
        let failed = instances.iter().filter(|r| r.status == Status::Fail).count();
        CertificationReport {
            schema_version: super::SCHEMA_VERSION,
            status: if failed == 0 { Status::Pass } else { Status::Fail },
            seed,
            instance_count: instances.len(),
            failed,
            instances,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Writes the summary JSON as `dir/name` and returns its path.
pub fn emit_report(report: &CertificationReport, dir: &Path, name: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, report.to_json())?;
    Ok(path)
}
