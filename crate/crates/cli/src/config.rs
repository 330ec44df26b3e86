use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use fpp_lab_core::measures::DEFAULT_GRID;
use fpp_lab_core::tree::DEFAULT_MAX_DEPTH;
use fpp_lab_core::weights::WeightFunction;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TreeConvergence,
    TreeVariational,
    LatticeSupercriticalZero,
    LatticeLengthRatio,
    ConcavityDerivative,
    MeasureSelftest,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TreeConvergence => "tree-convergence",
            ExperimentKind::TreeVariational => "tree-variational",
            ExperimentKind::LatticeSupercriticalZero => "lattice-supercritical-zero",
            ExperimentKind::LatticeLengthRatio => "lattice-length-ratio",
            ExperimentKind::ConcavityDerivative => "concavity-derivative",
            ExperimentKind::MeasureSelftest => "measure-selftest",
        }
    }

    fn is_tree(self) -> bool {
        matches!(
            self,
            ExperimentKind::TreeConvergence | ExperimentKind::TreeVariational
        )
    }

    fn is_lattice(self) -> bool {
        matches!(
            self,
            ExperimentKind::LatticeSupercriticalZero | ExperimentKind::LatticeLengthRatio
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pass/fail thresholds for the statistical verdicts.
///
/// The statistical ones are calibration constants rather than limits; see
/// [`Thresholds::provenance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub confidence: f64,
    pub wasserstein_max: f64,
    pub zero_fraction_min: f64,
    pub ci_half_width_max: f64,
    pub minimizer_residual_max: f64,
    pub midpoint_tolerance: f64,
    pub derivative_tolerance: f64,
    pub abs_cont_fraction_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            confidence: 0.99,
            wasserstein_max: 0.08,
            zero_fraction_min: 0.95,
            ci_half_width_max: 0.02,
            minimizer_residual_max: 1e-6,
            midpoint_tolerance: 1e-9,
            derivative_tolerance: 1e-4,
            abs_cont_fraction_min: 0.99,
        }
    }
}

impl Thresholds {
    /// Where each default comes from. Copied into every report.
    pub fn provenance() -> BTreeMap<String, String> {
        [
            ("confidence", "two-sided Student-t level for every Monte Carlo interval"),
            (
                "wasserstein_max",
                "calibration: identity law, arity 2, 100 replicas gave a mean near 0.054 at depth 20",
            ),
            (
                "zero_fraction_min",
                "calibration: zero mass 0.6 on Z^2, 30 replicas at n=200",
            ),
            ("ci_half_width_max", "Monte Carlo precision required before comparing with the optimizer"),
            ("minimizer_residual_max", "quadrature accuracy of the default 4096-cell grid"),
            ("midpoint_tolerance", "floating-point slack for exact midpoint concavity"),
            ("derivative_tolerance", "central difference with step 1e-4"),
            ("abs_cont_fraction_min", "fraction of sampled geodesic/interval pairs obeying the bound"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }
}

/// Concavity probe on the lattice, run alongside the tree identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeProbeConfig {
    pub d: usize,
    pub xi: Vec<f64>,
    pub n: f64,
    pub replicas: usize,
}

/// Interval sampling for the absolute-continuity bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsContOptions {
    pub n: f64,
    pub xi: Vec<f64>,
    pub replicas: usize,
    pub intervals_per_geodesic: usize,
    pub interval_lengths: Vec<f64>,
    pub min_length: usize,
    #[serde(default)]
    pub min_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: ExperimentKind,
    #[serde(default = "WeightFunction::identity")]
    pub weight_spec: WeightFunction,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub n_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_box_factor")]
    pub box_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Tree node budget and lattice vertex budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_budget: Option<u64>,
    #[serde(default = "default_cells")]
    pub quadrature_cells: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Extra laws whose minimizers are checked by `tree-variational`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight_suite: Vec<WeightFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<WeightFunction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_probe: Option<LatticeProbeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_cont: Option<AbsContOptions>,
    /// Lattice only: compute the shortest and longest geodesic lengths per
    /// replica.
    #[serde(default, skip_serializing_if = "is_false")]
    pub length_extremes: bool,
    /// Dump the geodesic of replica 0 at the largest `n` as a table.
    #[serde(default, skip_serializing_if = "is_false")]
    pub dump_edges: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn default_d() -> usize {
    2
}

fn default_replicas() -> usize {
    30
}

fn default_box_factor() -> f64 {
    2.0
}

fn default_cells() -> usize {
    DEFAULT_GRID
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

const UNIT_TOLERANCE: f64 = 1e-9;

struct Checker(Vec<Violation>);

impl Checker {
    fn require(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                field: field.to_string(),
                message: message.into(),
            });
        }
    }

    fn direction(&mut self, field: &str, xi: &[f64], d: usize) {
        self.require(
            xi.len() == d,
            field,
            format!("expected {d} components, got {}", xi.len()),
        );
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.require(
            (norm - 1.0).abs() <= UNIT_TOLERANCE,
            field,
            format!("Euclidean norm is {norm}, expected 1"),
        );
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.to_string())
    }

    /// Collects every violated field rather than stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker(Vec::new());
        let kind = self.kind;

        c.require(self.replicas >= 1, "replicas", "must be at least 1");
        if kind != ExperimentKind::MeasureSelftest && kind != ExperimentKind::ConcavityDerivative {
            c.require(
                self.replicas >= 2,
                "replicas",
                "confidence intervals need at least 2",
            );
        }
        c.require(
            strictly_increasing(&self.n_list),
            "n_list",
            "must be strictly increasing",
        );
        c.require(
            self.n_list.iter().all(|n| n.is_finite() && *n > 0.0),
            "n_list",
            "entries must be positive",
        );
        if kind.is_tree() || kind.is_lattice() {
            c.require(!self.n_list.is_empty(), "n_list", "must not be empty");
        }
        if kind.is_tree() {
            c.require(
                self.n_list
                    .iter()
                    .all(|n| n.fract() == 0.0 && *n <= DEFAULT_MAX_DEPTH as f64),
                "n_list",
                format!("tree depths must be integers no larger than {DEFAULT_MAX_DEPTH}"),
            );
        }
        if kind.is_tree() || kind == ExperimentKind::ConcavityDerivative {
            c.require(self.d >= 2, "d", "arity must be at least 2");
        }
        if kind.is_lattice() {
            c.require(self.d >= 1, "d", "dimension must be at least 1");
            match &self.xi {
                Some(xi) => c.direction("xi", xi, self.d),
                None => c.require(false, "xi", "required for lattice experiments"),
            }
        } else if let Some(xi) = &self.xi {
            c.direction("xi", xi, self.d);
        }
        c.require(
            self.box_factor.is_finite() && self.box_factor >= 1.0,
            "box_factor",
            "must be at least 1",
        );
        c.require(
            self.quadrature_cells >= 16,
            "quadrature_cells",
            "must be at least 16",
        );
        c.require(
            self.node_budget != Some(0),
            "node_budget",
            "must be positive",
        );
        if let Err(e) = self.weight_spec.validate() {
            c.require(false, "weight_spec", e.to_string());
        }
        for (i, w) in self.weight_suite.iter().enumerate() {
            if let Err(e) = w.validate() {
                c.require(false, &format!("weight_suite[{i}]"), e.to_string());
            }
        }
        if self.length_extremes {
            c.require(
                kind.is_lattice(),
                "length_extremes",
                "only lattice experiments have geodesic lengths",
            );
        }
        if self.dump_edges {
            c.require(
                kind.is_lattice() || kind.is_tree(),
                "dump_edges",
                "only tree and lattice experiments have a geodesic to dump",
            );
        }
        if kind == ExperimentKind::LatticeLengthRatio {
            c.require(
                self.weight_spec.is_atomless(),
                "weight_spec",
                "lattice-length-ratio needs an atomless law",
            );
        }

        let t = &self.thresholds;
        c.require(
            t.confidence > 0.0 && t.confidence < 1.0,
            "thresholds.confidence",
            "must lie in (0, 1)",
        );
        c.require(
            (0.0..=1.0).contains(&t.zero_fraction_min),
            "thresholds.zero_fraction_min",
            "must lie in [0, 1]",
        );
        c.require(
            (0.0..=1.0).contains(&t.abs_cont_fraction_min),
            "thresholds.abs_cont_fraction_min",
            "must lie in [0, 1]",
        );
        for (field, value) in [
            ("thresholds.wasserstein_max", t.wasserstein_max),
            ("thresholds.ci_half_width_max", t.ci_half_width_max),
            (
                "thresholds.minimizer_residual_max",
                t.minimizer_residual_max,
            ),
            ("thresholds.midpoint_tolerance", t.midpoint_tolerance),
            ("thresholds.derivative_tolerance", t.derivative_tolerance),
        ] {
            c.require(
                value.is_finite() && value >= 0.0,
                field,
                "must be finite and nonnegative",
            );
        }

        if kind == ExperimentKind::ConcavityDerivative {
            match &self.psi {
                Some(psi) => {
                    if let Err(e) = psi.validate() {
                        c.require(false, "psi", e.to_string());
                    }
                }
                None => c.require(false, "psi", "required for concavity-derivative"),
            }
            c.require(
                self.h_grid.len() >= 2,
                "h_grid",
                "needs at least two points",
            );
            c.require(
                strictly_increasing(&self.h_grid),
                "h_grid",
                "must be strictly increasing",
            );
            c.require(
                self.h_grid.iter().all(|h| h.is_finite()),
                "h_grid",
                "entries must be finite",
            );
        }
        if let Some(p) = &self.lattice_probe {
            c.require(p.d >= 1, "lattice_probe.d", "must be at least 1");
            c.direction("lattice_probe.xi", &p.xi, p.d);
            c.require(
                p.n.is_finite() && p.n > 0.0,
                "lattice_probe.n",
                "must be positive",
            );
            c.require(
                p.replicas >= 2,
                "lattice_probe.replicas",
                "must be at least 2",
            );
        }
        if let Some(a) = &self.abs_cont {
            c.direction("abs_cont.xi", &a.xi, self.d);
            c.require(
                a.n.is_finite() && a.n > 0.0,
                "abs_cont.n",
                "must be positive",
            );
            c.require(a.replicas >= 1, "abs_cont.replicas", "must be at least 1");
            c.require(
                a.intervals_per_geodesic >= 1,
                "abs_cont.intervals_per_geodesic",
                "must be at least 1",
            );
            c.require(
                !a.interval_lengths.is_empty()
                    && a.interval_lengths.iter().all(|l| *l > 0.0 && *l < 1.0),
                "abs_cont.interval_lengths",
                "need at least one length in (0, 1)",
            );
        }

        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(c.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_tree_config_parses() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "tree-convergence", "n_list": [5, 10], "replicas": 4}"#,
        )
        .unwrap();
        assert_eq!(cfg.weight_spec, WeightFunction::identity());
        assert_eq!(cfg.thresholds, Thresholds::default());
    }

    #[test]
    fn every_violation_is_listed() {
        let err = ExperimentConfig::from_json(
            r#"{"kind": "lattice-supercritical-zero", "n_list": [10, 5], "replicas": 0,
                "xi": [1.0, 1.0], "box_factor": 0.5}"#,
        )
        .unwrap_err();
        let ConfigError::Invalid(v) = err else {
            panic!("expected validation failure, got {err}");
        };
        let fields: Vec<&str> = v.iter().map(|v| v.field.as_str()).collect();
        for f in ["replicas", "n_list", "xi", "box_factor"] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"kind": "measure-selftest", "replica": 3}"#);
        assert!(matches!(err, Err(ConfigError::Parse(_))));
    }

    #[test]
    fn tree_depths_must_be_integers() {
        let err = ExperimentConfig::from_json(
            r#"{"kind": "tree-variational", "n_list": [2.5], "replicas": 3}"#,
        );
        assert!(matches!(err, Err(ConfigError::Invalid(_))));
    }
}
