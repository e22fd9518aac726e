//! Versioned JSON report records written by the subcommands.

use serde::Serialize;
use vine_empirica::inference::{ConfidenceInterval, TestResult};

/// Bumped whenever a field changes meaning or shape.
pub const SCHEMA_VERSION: u32 = 1;

/// One interval-producing run (`ci`, `rho`).
#[derive(Serialize)]
pub struct IntervalRecord {
    pub schema_version: u32,
    pub command: &'static str,
    pub edge: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
    pub method: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence_level: f64,
    pub bootstrap_replicates: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl IntervalRecord {
    pub fn new(
        command: &'static str,
        edge: String,
        point: Option<[f64; 2]>,
        estimate: f64,
        ci: ConfidenceInterval,
        b: usize,
        seed: u64,
    ) -> Self {
        IntervalRecord {
            schema_version: SCHEMA_VERSION,
            command,
            edge,
            point,
            method: ci.method.to_string(),
            estimate,
            lower: ci.lower,
            upper: ci.upper,
            confidence_level: ci.level,
            bootstrap_replicates: b,
            seed,
            warning: ci.warning,
        }
    }
}

/// One hypothesis-test run (`indep-test`, `gof`).
#[derive(Serialize)]
pub struct TestRecord {
    pub schema_version: u32,
    pub command: &'static str,
    pub edge: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub statistic: f64,
    pub p_value: f64,
    pub critical_values: Vec<CriticalValue>,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct CriticalValue {
    pub alpha: f64,
    pub value: f64,
}

impl TestRecord {
    pub fn new(
        command: &'static str,
        edge: String,
        family: Option<String>,
        result: TestResult,
        seed: u64,
    ) -> Self {
        TestRecord {
            schema_version: SCHEMA_VERSION,
            command,
            edge,
            family,
            statistic: result.statistic,
            p_value: result.p_value,
            critical_values: result
                .critical_values
                .iter()
                .map(|&(alpha, value)| CriticalValue { alpha, value })
                .collect(),
            replicates: result.replicates,
            seed,
        }
    }
}

/// Whole-vine fit report produced by `estimate`.
#[derive(Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub data: String,
    pub n: usize,
    pub d: usize,
    pub dropped_rows: usize,
    pub bandwidth: f64,
    pub bootstrap_replicates: usize,
    pub mc_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub edges: Vec<EdgeReport>,
}

/// Per-edge inference inside an [`EstimateReport`].
#[derive(Serialize)]
pub struct EdgeReport {
    /// Tree level, 1-based to match edge labels.
    pub level: usize,
    pub label: String,
    pub spearman_rho: f64,
    pub rho_lower: f64,
    pub rho_upper: f64,
    pub independence_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}
