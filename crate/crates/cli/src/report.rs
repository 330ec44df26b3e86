use std::collections::BTreeMap;

use fpp_lab_core::lattice::GeodesicSummary;
use fpp_lab_core::stats::Summary;
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::ExperimentConfig;

// Non-finite floats are written as JSON null; read them back as NaN.
fn nan<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nan_map<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
    let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| (k, v.unwrap_or(f64::NAN)))
        .collect())
}

fn nan_rows<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    let raw = Vec::<Vec<Option<f64>>>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect())
}

/// Monte Carlo summary of one metric at one `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: f64,
    pub metric: String,
    pub count: usize,
    #[serde(deserialize_with = "nan")]
    pub mean: f64,
    #[serde(deserialize_with = "nan")]
    pub sd: f64,
    #[serde(deserialize_with = "nan")]
    pub ci_lo: f64,
    #[serde(deserialize_with = "nan")]
    pub ci_hi: f64,
}

impl Aggregate {
    pub fn new(n: f64, metric: &str, s: &Summary) -> Self {
        Self {
            n,
            metric: metric.to_string(),
            count: s.count,
            mean: s.mean,
            sd: s.sd,
            ci_lo: s.ci_lo,
            ci_hi: s.ci_hi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub n: f64,
    pub replica: usize,
    pub seed: u64,
    pub metric: String,
    #[serde(deserialize_with = "nan")]
    pub value: f64,
}

/// A named pass/fail rule. `observed` is compared against `threshold` in the
/// direction the rule's detail states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub rule: String,
    pub passed: bool,
    #[serde(deserialize_with = "nan")]
    pub observed: f64,
    #[serde(deserialize_with = "nan")]
    pub threshold: f64,
    pub detail: String,
}

/// A replica that did not produce a value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub n: f64,
    pub replica: usize,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub budget: u64,
    pub budget_failures: usize,
    pub nodes_explored: u64,
    pub failures: Vec<ReplicaFailure>,
}

/// Plot-ready numeric table, emitted as its own CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    #[serde(deserialize_with = "nan_rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub threshold_notes: BTreeMap<String, String>,
    #[serde(deserialize_with = "nan_map")]
    pub results: BTreeMap<String, f64>,
    pub aggregates: Vec<Aggregate>,
    pub replicas: Vec<ReplicaRow>,
    pub tables: BTreeMap<String, Table>,
    pub verdicts: Vec<Verdict>,
    pub telemetry: Telemetry,
    /// One entry per successful lattice replica.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub geodesics: Vec<GeodesicSummary>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn aggregate(&self, n: f64, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.n == n && a.metric == metric)
    }

    pub fn verdict(&self, rule: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.rule == rule)
    }
}
