// SPDX-License-Identifier: MIT OR Apache-2.0

//! Report JSON, run manifest and profile CSV.

use corrshift::detector::AbortedBranch;
use corrshift::{ChangePointReport, DetectorConfig, ScanProfile};
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<String>,
    /// Transforms applied to the inputs, in order.
    pub transforms: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<DetectorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub advisories: Vec<String>,
    /// Only recorded on request, so that artifacts stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: "corrshift".into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            inputs: Vec::new(),
            transforms: Vec::new(),
            seed,
            config: None,
            advisories: Vec::new(),
            wall_time_secs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub k: usize,
    pub z: f64,
    pub p_value: f64,
    pub segment: [usize; 2],
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub points: Vec<PointRecord>,
    pub n: usize,
    #[serde(rename = "T")]
    pub len: usize,
    pub config: DetectorConfig,
    pub manifest: RunManifest,
    pub total_tests: usize,
    pub aborted: Vec<AbortedBranch>,
}

impl JsonReport {
    pub fn new(report: &ChangePointReport, manifest: RunManifest) -> Self {
        Self {
            points: report
                .points
                .iter()
                .map(|p| PointRecord {
                    k: p.location,
                    z: p.z,
                    p_value: p.p_value,
                    segment: [p.segment.0, p.segment.1],
                    depth: p.depth,
                })
                .collect(),
            n: report.n,
            len: report.len,
            config: report.config_echo.clone(),
            manifest,
            total_tests: report.total_tests,
            aborted: report.aborted.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

/// Root scan as CSV: `k,d,mu0,sigma0,z,zb_max`, where `zb_max` is the
/// bootstrap envelope `max_b z_b(k)`.
pub fn profile_csv(profile: &ScanProfile) -> String {
    let mut out = String::from("k,d,mu0,sigma0,z,zb_max\n");
    for i in 0..profile.k_values.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            profile.k_values[i],
            profile.d_values[i],
            profile.mu0[i],
            profile.sigma0[i],
            profile.z_values[i],
            profile.boot_envelope[i]
        ));
    }
    out
}

/// Bootstrap scan maxima `Z_b` in replicate order.
pub fn boot_maxima_csv(profile: &ScanProfile) -> String {
    let mut out = String::from("b,z_max\n");
    for (b, z) in profile.boot_maxima.iter().enumerate() {
        out.push_str(&format!("{},{}\n", b + 1, z));
    }
    out
}
