use std::cmp::Ordering;
use std::collections::BTreeMap;

use fpp_lab_core::lattice::{
    absolute_continuity_check, AbsContConfig, BoxSpec, GeodesicRecord, GeodesicSummary,
    LatticeEnvironment, LatticeError, DEFAULT_VERTEX_BUDGET,
};
use fpp_lab_core::measures::{wasserstein, DiscreteMeasure, MeasureError};
use fpp_lab_core::par;
use fpp_lab_core::rng::replica_seed;
use fpp_lab_core::stats::{ratio_interval, t_critical, Summary};
use fpp_lab_core::tree::{
    TreeEnvironment, TreeError, TreeGeodesicRecord, DEFAULT_MAX_DEPTH, DEFAULT_NODE_BUDGET,
};
use fpp_lab_core::variational::{
    lattice_concavity_probe, solve_minimizer, tree_derivative_identity, LatticeProbe,
    TiltedMinimizer, VariationalError,
};
use fpp_lab_core::weights::WeightFunction;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, Thresholds};
use crate::emit::format_number as fmt;
use crate::report::{
    Aggregate, ExperimentReport, ReplicaFailure, ReplicaRow, Table, Telemetry, Verdict,
};
use crate::selftest;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Settings that come from the environment rather than the config file.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Replaces both the tree node budget and the lattice vertex budget.
    pub budget_override: Option<u64>,
}

enum Failure {
    Budget(String),
    Other(String),
}

impl From<TreeError> for Failure {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::BudgetExceeded(_) => Failure::Budget(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::MemoryBudget { .. } => Failure::Budget(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<MeasureError> for Failure {
    fn from(e: MeasureError) -> Self {
        Failure::Other(e.to_string())
    }
}

/// Metric values from one replica, plus nodes explored.
struct Outcome {
    metrics: Vec<(&'static str, f64)>,
    nodes: u64,
    geodesic: Option<GeodesicSummary>,
}

/// Accumulates the pieces of a report.
pub(crate) struct Builder {
    level: f64,
    pub(crate) results: BTreeMap<String, f64>,
    aggregates: Vec<Aggregate>,
    replicas: Vec<ReplicaRow>,
    pub(crate) tables: BTreeMap<String, Table>,
    pub(crate) verdicts: Vec<Verdict>,
    telemetry: Telemetry,
    geodesics: Vec<GeodesicSummary>,
}

impl Builder {
    pub(crate) fn new(level: f64, budget: u64) -> Self {
        Self {
            level,
            results: BTreeMap::new(),
            aggregates: Vec::new(),
            replicas: Vec::new(),
            tables: BTreeMap::new(),
            verdicts: Vec::new(),
            telemetry: Telemetry {
                budget,
                ..Telemetry::default()
            },
            geodesics: Vec::new(),
        }
    }

    pub(crate) fn verdict(
        &mut self,
        rule: String,
        passed: bool,
        observed: f64,
        threshold: f64,
        detail: String,
    ) {
        self.verdicts.push(Verdict {
            rule,
            passed,
            observed,
            threshold,
            detail,
        });
    }

    /// Runs `job` on replicas `0..count` with the shared seed schedule and
    /// records every metric. Returns per-metric values over successful
    /// replicas, aligned by replica.
    fn sweep<F>(
        &mut self,
        n: f64,
        seed: u64,
        count: usize,
        job: F,
    ) -> BTreeMap<&'static str, Vec<f64>>
    where
        F: Fn(u64) -> Result<Outcome, Failure> + Sync + Send,
    {
        let outcomes = par::map(count, |i| job(replica_seed(seed, i as u64)));
        let mut columns: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        let mut order: Vec<&'static str> = Vec::new();
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(out) => {
                    self.telemetry.nodes_explored += out.nodes;
                    self.geodesics.extend(out.geodesic);
                    for (metric, value) in out.metrics {
                        if !columns.contains_key(metric) {
                            order.push(metric);
                        }
                        columns.entry(metric).or_default().push(value);
                        self.replicas.push(ReplicaRow {
                            n,
                            replica: i,
                            seed: replica_seed(seed, i as u64),
                            metric: metric.to_string(),
                            value,
                        });
                    }
                }
                Err(failure) => {
                    let error = match failure {
                        Failure::Budget(e) => {
                            self.telemetry.budget_failures += 1;
                            e
                        }
                        Failure::Other(e) => e,
                    };
                    self.telemetry.failures.push(ReplicaFailure {
                        n,
                        replica: i,
                        error,
                    });
                }
            }
        }
        for metric in order {
            let s = Summary::with_level(&columns[metric], self.level);
            self.aggregates.push(Aggregate::new(n, metric, &s));
        }
        columns
    }

    fn summary(&self, values: Option<&Vec<f64>>) -> Summary {
        Summary::with_level(values.map_or(&[][..], |v| v), self.level)
    }

    pub(crate) fn finish(self, config: &ExperimentConfig) -> ExperimentReport {
        ExperimentReport {
            config: config.clone(),
            threshold_notes: Thresholds::provenance(),
            results: self.results,
            aggregates: self.aggregates,
            replicas: self.replicas,
            tables: self.tables,
            verdicts: self.verdicts,
            telemetry: self.telemetry,
            geodesics: self.geodesics,
        }
    }
}

/// Runs one experiment. Replica failures are recorded and the run continues;
/// only setup problems are errors.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentReport, RunError> {
    config.validate()?;
    let budget = options.budget_override.or(config.node_budget);
    match config.kind {
        ExperimentKind::TreeConvergence => {
            tree_convergence(config, budget.unwrap_or(DEFAULT_NODE_BUDGET))
        }
        ExperimentKind::TreeVariational => {
            tree_variational(config, budget.unwrap_or(DEFAULT_NODE_BUDGET))
        }
        ExperimentKind::LatticeSupercriticalZero => {
            supercritical_zero(config, budget.unwrap_or(DEFAULT_VERTEX_BUDGET))
        }
        ExperimentKind::LatticeLengthRatio => {
            length_ratio(config, budget.unwrap_or(DEFAULT_VERTEX_BUDGET))
        }
        ExperimentKind::ConcavityDerivative => {
            concavity(config, budget.unwrap_or(DEFAULT_VERTEX_BUDGET))
        }
        ExperimentKind::MeasureSelftest => Ok(selftest::measure_suite(config)),
    }
}

fn rule(config: &ExperimentConfig, name: &str) -> String {
    format!("{}/{}", config.kind, name)
}

fn tree_record(
    config: &ExperimentConfig,
    n: usize,
    budget: u64,
    seed: u64,
) -> Result<TreeGeodesicRecord, TreeError> {
    TreeEnvironment::new(config.d, seed, config.weight_spec.clone())?
        .with_node_budget(budget)
        .with_max_depth(n.max(DEFAULT_MAX_DEPTH))
        .tree_minimum(n)
}

fn limit_table(measure: &DiscreteMeasure, columns: [&str; 2]) -> Table {
    let mut t = Table::new(&columns);
    for (x, w) in measure.rows() {
        t.push(vec![x, w]);
    }
    t
}

fn record_minimizer(b: &mut Builder, m: &TiltedMinimizer) {
    b.results.insert("mu".into(), m.mu);
    b.results.insert("alpha_star".into(), m.alpha_star);
    b.results.insert("log_normalizer".into(), m.log_normalizer);
    b.results.insert("kl".into(), m.kl_value);
    b.results
        .insert("atom_case".into(), if m.atom_case { 1.0 } else { 0.0 });
    b.results
        .insert("essential_infimum".into(), m.essential_infimum);
}

fn tree_convergence(config: &ExperimentConfig, budget: u64) -> Result<ExperimentReport, RunError> {
    let t = &config.thresholds;
    let mut b = Builder::new(t.confidence, budget);
    let tau = &config.weight_spec;
    let minimizer = solve_minimizer(tau, config.d, config.quadrature_cells)?;
    let limit_weights = minimizer.pushforward(tau)?;
    let limit_uniforms = minimizer.density.to_discrete();
    record_minimizer(&mut b, &minimizer);
    b.tables.insert(
        "limit_measure".into(),
        limit_table(&limit_weights, ["t", "mass"]),
    );

    let mut means = Vec::new();
    for &n in &config.n_list {
        let depth = n as usize;
        let columns = b.sweep(n, config.seed, config.replicas, |seed| {
            let rec = tree_record(config, depth, budget, seed)?;
            let (sigma, nu) = rec.empirical_measures()?;
            Ok(Outcome {
                metrics: vec![
                    ("t_over_n", rec.t_n / n),
                    ("wasserstein_weights", wasserstein(&nu, &limit_weights)?),
                    (
                        "wasserstein_uniforms",
                        wasserstein(&sigma, &limit_uniforms)?,
                    ),
                ],
                nodes: rec.nodes_explored,
                geodesic: None,
            })
        });
        means.push((n, b.summary(columns.get("wasserstein_weights")).mean));
    }
    dump_tree_geodesic(&mut b, config, budget);

    let increases = means
        .windows(2)
        .filter(|w| w[1].1.partial_cmp(&w[0].1) != Some(Ordering::Less))
        .count();
    let trail = means
        .iter()
        .map(|(n, m)| format!("n={}: {}", fmt(*n), fmt(*m)))
        .collect::<Vec<_>>()
        .join(", ");
    b.verdict(
        rule(config, "wasserstein-strictly-decreasing"),
        increases == 0,
        increases as f64,
        0.0,
        format!("count of non-decreasing steps in mean W(nu_hat, tau*sigma_star); {trail}"),
    );
    let (last_n, last) = *means.last().expect("n_list is non-empty");
    b.verdict(
        rule(config, "wasserstein-at-largest-n"),
        last <= t.wasserstein_max,
        last,
        t.wasserstein_max,
        format!(
            "mean W(nu_hat, tau*sigma_star) at n={} must not exceed the threshold",
            fmt(last_n)
        ),
    );
    Ok(b.finish(config))
}

fn minimizer_properties(b: &mut Builder, config: &ExperimentConfig) -> (usize, f64, Vec<String>) {
    let tol = config.thresholds.minimizer_residual_max;
    let mut table = Table::new(&[
        "law",
        "atom_case",
        "mu",
        "alpha_star",
        "kl_residual",
        "mean_residual",
    ]);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let laws = std::iter::once(&config.weight_spec).chain(&config.weight_suite);
    let mut count = 0;
    for (i, tau) in laws.enumerate() {
        count += 1;
        match solve_minimizer(tau, config.d, config.quadrature_cells) {
            Ok(m) => {
                table.push(vec![
                    i as f64,
                    if m.atom_case { 1.0 } else { 0.0 },
                    m.mu,
                    m.alpha_star,
                    m.kl_residual,
                    m.mean_residual,
                ]);
                if m.atom_case {
                    let dirac = m
                        .pushforward(tau)
                        .map(|p| p.atoms().iter().all(|&(x, _)| x == m.essential_infimum))
                        .unwrap_or(false);
                    if m.mu != m.essential_infimum || !dirac {
                        failures.push(format!(
                            "law {i}: atom case without a Dirac mass at the infimum"
                        ));
                    }
                } else {
                    worst = worst.max(m.kl_residual).max(m.mean_residual);
                    if m.kl_residual > tol || m.mean_residual > tol {
                        failures.push(format!(
                            "law {i}: residuals {} and {}",
                            fmt(m.kl_residual),
                            fmt(m.mean_residual)
                        ));
                    }
                }
            }
            Err(e) => failures.push(format!("law {i}: {e}")),
        }
    }
    b.tables.insert("minimizer_suite".into(), table);
    (count, worst, failures)
}

fn tree_variational(config: &ExperimentConfig, budget: u64) -> Result<ExperimentReport, RunError> {
    let t = &config.thresholds;
    let mut b = Builder::new(t.confidence, budget);
    let tau = &config.weight_spec;
    let minimizer = solve_minimizer(tau, config.d, config.quadrature_cells)?;
    record_minimizer(&mut b, &minimizer);
    let mut density = Table::new(&["u", "tau", "density"]);
    for (u, rho) in minimizer.density.rows() {
        density.push(vec![u, tau.eval(u), rho]);
    }
    b.tables.insert("minimizer_density".into(), density);

    let mut last = None;
    for &n in &config.n_list {
        let depth = n as usize;
        let columns = b.sweep(n, config.seed, config.replicas, |seed| {
            let rec = tree_record(config, depth, budget, seed)?;
            Ok(Outcome {
                metrics: vec![("t_over_n", rec.t_n / n)],
                nodes: rec.nodes_explored,
                geodesic: None,
            })
        });
        last = Some((n, b.summary(columns.get("t_over_n"))));
    }
    dump_tree_geodesic(&mut b, config, budget);
    let (n, s) = last.expect("n_list is non-empty");
    b.verdict(
        rule(config, "mu-in-monte-carlo-ci"),
        s.contains(minimizer.mu),
        s.mean,
        minimizer.mu,
        format!(
            "optimizer mu {} against the {} CI [{}, {}] of T_n/n at n={} over {} replicas",
            fmt(minimizer.mu),
            fmt(t.confidence),
            fmt(s.ci_lo),
            fmt(s.ci_hi),
            fmt(n),
            s.count
        ),
    );
    b.verdict(
        rule(config, "ci-half-width"),
        s.half_width() <= t.ci_half_width_max,
        s.half_width(),
        t.ci_half_width_max,
        format!(
            "half-width of the CI of T_n/n at n={} must not exceed the threshold",
            fmt(n)
        ),
    );

    let (laws, worst, failures) = minimizer_properties(&mut b, config);
    b.verdict(
        rule(config, "minimizer-properties"),
        failures.is_empty(),
        worst,
        t.minimizer_residual_max,
        if failures.is_empty() {
            format!("{laws} laws: entropy and mean residuals within tolerance, atom cases exact")
        } else {
            failures.join("; ")
        },
    );
    Ok(b.finish(config))
}

fn lattice_outcome(
    config: &ExperimentConfig,
    n: f64,
    budget: u64,
    seed: u64,
) -> Result<Outcome, Failure> {
    let env = LatticeEnvironment::new(
        config.d,
        seed,
        config.weight_spec.clone(),
        config.box_factor,
    )?
    .with_vertex_budget(budget);
    let xi = config.xi.as_deref().expect("validated");
    let rec = env.passage_time_to_direction(n, xi)?;
    let extremes = if config.length_extremes {
        let bx = BoxSpec::for_distance(n, config.box_factor)?;
        Some(env.geodesic_length_extremes(&bx, &rec.source, &rec.target)?)
    } else {
        None
    };
    let length = rec.length as f64;
    let mut metrics = vec![
        ("zero_fraction", rec.zero_fraction()),
        ("t_over_n", rec.passage_time / n),
        ("length_over_n", length / n),
        ("t_over_length", rec.passage_time / length),
        ("boundary_hit", if rec.touches_boundary { 1.0 } else { 0.0 }),
    ];
    if let Some(e) = &extremes {
        metrics.push(("length_min_over_n", e.n_min as f64 / n));
        metrics.push(("length_max_over_n", e.n_max as f64 / n));
    }
    Ok(Outcome {
        geodesic: Some(rec.summary(extremes.as_ref())),
        metrics,
        nodes: 0,
    })
}

fn edge_table(rec: &GeodesicRecord) -> Table {
    let d = rec.source.0.len();
    let mut columns = vec!["step".to_string()];
    columns.extend((0..d).map(|k| format!("from_{k}")));
    columns.extend((0..d).map(|k| format!("to_{k}")));
    columns.extend(["uniform".to_string(), "weight".to_string()]);
    let mut table = Table {
        columns,
        rows: Vec::new(),
    };
    for e in rec.edge_rows() {
        let mut row = vec![e.step as f64];
        row.extend(e.from.iter().chain(&e.to).map(|&c| c as f64));
        row.extend([e.uniform, e.weight]);
        table.push(row);
    }
    table
}

/// Edge dump for replica 0 at the largest `n`, when requested.
fn dump_lattice_geodesic(b: &mut Builder, config: &ExperimentConfig, budget: u64) {
    let (Some(&n), true) = (config.n_list.last(), config.dump_edges) else {
        return;
    };
    let xi = config.xi.as_deref().expect("validated");
    let rec = LatticeEnvironment::new(
        config.d,
        replica_seed(config.seed, 0),
        config.weight_spec.clone(),
        config.box_factor,
    )
    .map(|env| env.with_vertex_budget(budget))
    .and_then(|env| env.passage_time_to_direction(n, xi));
    if let Ok(rec) = rec {
        b.tables.insert("geodesic_edges".into(), edge_table(&rec));
    }
}

fn dump_tree_geodesic(b: &mut Builder, config: &ExperimentConfig, budget: u64) {
    let (Some(&n), true) = (config.n_list.last(), config.dump_edges) else {
        return;
    };
    if let Ok(rec) = tree_record(config, n as usize, budget, replica_seed(config.seed, 0)) {
        let mut table = Table::new(&["depth", "child", "uniform", "weight"]);
        for (k, ((&child, &u), &w)) in rec
            .label
            .iter()
            .zip(&rec.uniforms)
            .zip(&rec.weights)
            .enumerate()
        {
            table.push(vec![(k + 1) as f64, child as f64, u, w]);
        }
        b.tables.insert("tree_geodesic".into(), table);
    }
}

fn supercritical_zero(
    config: &ExperimentConfig,
    budget: u64,
) -> Result<ExperimentReport, RunError> {
    let t = &config.thresholds;
    let mut b = Builder::new(t.confidence, budget);
    let zero_mass = config
        .weight_spec
        .summarize(fpp_lab_core::measures::DEFAULT_GRID)
        .zero_mass;
    b.results.insert("zero_mass".into(), zero_mass);
    let mut means = Vec::new();
    for &n in &config.n_list {
        let columns = b.sweep(n, config.seed, config.replicas, |seed| {
            lattice_outcome(config, n, budget, seed)
        });
        means.push((n, b.summary(columns.get("zero_fraction")).mean));
    }
    dump_lattice_geodesic(&mut b, config, budget);
    let decreases = means
        .windows(2)
        .filter(|w| w[1].1.partial_cmp(&w[0].1) != Some(Ordering::Greater))
        .count();
    let trail = means
        .iter()
        .map(|(n, m)| format!("n={}: {}", fmt(*n), fmt(*m)))
        .collect::<Vec<_>>()
        .join(", ");
    b.verdict(
        rule(config, "zero-fraction-increasing"),
        decreases == 0,
        decreases as f64,
        0.0,
        format!("count of non-increasing steps in the mean geodesic zero fraction; {trail}"),
    );
    let (last_n, last) = *means.last().expect("n_list is non-empty");
    b.verdict(
        rule(config, "zero-fraction-at-largest-n"),
        last >= t.zero_fraction_min,
        last,
        t.zero_fraction_min,
        format!(
            "mean geodesic zero fraction at n={} must reach the threshold",
            fmt(last_n)
        ),
    );
    Ok(b.finish(config))
}

/// `mean(l) − mean(a)/mean(c)` with the half-width of its paired
/// delta-method interval.
pub fn ratio_gap(l: &[f64], a: &[f64], c: &[f64], level: f64) -> (f64, f64) {
    let m = l.len() as f64;
    let (lm, am, cm) = (
        l.iter().sum::<f64>() / m,
        a.iter().sum::<f64>() / m,
        c.iter().sum::<f64>() / m,
    );
    let influence: Vec<f64> = l
        .iter()
        .zip(a)
        .zip(c)
        .map(|((li, ai), ci)| li - (ai / cm - am * ci / (cm * cm)))
        .collect();
    let s = Summary::with_level(&influence, level);
    let half = if l.len() < 2 {
        f64::INFINITY
    } else {
        t_critical(level, l.len() - 1) * s.sd / m.sqrt()
    };
    (lm - am / cm, half)
}

/// Half-width of the joint interval for `mean(l)` against `mean(a)/mean(c)`:
/// the two marginal half-widths added in quadrature.
pub fn joint_half_width(l: &[f64], a: &[f64], c: &[f64], level: f64) -> f64 {
    if l.len() < 2 {
        return f64::INFINITY;
    }
    let left = Summary::with_level(l, level).half_width();
    let (_, right) = ratio_interval(a, c, level);
    left.hypot(right)
}

fn length_ratio(config: &ExperimentConfig, budget: u64) -> Result<ExperimentReport, RunError> {
    let t = &config.thresholds;
    let mut b = Builder::new(t.confidence, budget);
    let mut last = None;
    for &n in &config.n_list {
        let columns = b.sweep(n, config.seed, config.replicas, |seed| {
            lattice_outcome(config, n, budget, seed)
        });
        last = Some((n, columns));
    }
    dump_lattice_geodesic(&mut b, config, budget);
    let (n, columns) = last.expect("n_list is non-empty");
    let pick = |k: &str| columns.get(k).cloned().unwrap_or_default();
    let (l, a, c) = (
        pick("length_over_n"),
        pick("t_over_n"),
        pick("t_over_length"),
    );
    let (gap, paired) = if l.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        ratio_gap(&l, &a, &c, t.confidence)
    };
    let half = joint_half_width(&l, &a, &c, t.confidence);
    b.results.insert("length_ratio_gap".into(), gap);
    b.results
        .insert("length_ratio_joint_half_width".into(), half);
    b.results
        .insert("length_ratio_paired_half_width".into(), paired);
    b.verdict(
        rule(config, "length-ratio-identity"),
        gap.abs() <= half,
        gap.abs(),
        half,
        format!(
            "|mean(|gamma|/n) - mean(T/n)/mean(T/|gamma|)| against the joint {} CI half-width at n={} over {} replicas",
            fmt(t.confidence),
            fmt(n),
            l.len()
        ),
    );

    if let Some(opts) = &config.abs_cont {
        let cfg = AbsContConfig {
            dimension: config.d,
            n: opts.n,
            xi: opts.xi.clone(),
            box_factor: config.box_factor,
            replicas: opts.replicas,
            intervals_per_geodesic: opts.intervals_per_geodesic,
            interval_lengths: opts.interval_lengths.clone(),
            min_length: opts.min_length,
            seed: config.seed,
        };
        let report = absolute_continuity_check(&config.weight_spec, &cfg)?;
        let mut table = Table::new(&[
            "replica",
            "geodesic_length",
            "interval_start",
            "interval_length",
            "mass",
            "bound",
        ]);
        for s in &report.samples {
            table.push(vec![
                s.replica as f64,
                s.geodesic_length as f64,
                s.interval_start,
                s.interval_length,
                s.mass,
                s.bound,
            ]);
        }
        b.tables.insert("abs_cont_samples".into(), table);
        let enough = report.pairs >= opts.min_pairs;
        b.verdict(
            rule(config, "absolute-continuity-bound"),
            enough && report.pairs > 0 && report.fraction >= t.abs_cont_fraction_min,
            report.fraction,
            t.abs_cont_fraction_min,
            format!(
                "{} of {} geodesic/interval pairs within the bound (at least {} pairs needed, {} geodesics shorter than {})",
                report.satisfied, report.pairs, opts.min_pairs, report.short_geodesics, opts.min_length
            ),
        );
    }
    Ok(b.finish(config))
}

fn concavity(config: &ExperimentConfig, budget: u64) -> Result<ExperimentReport, RunError> {
    let t = &config.thresholds;
    let mut b = Builder::new(t.confidence, budget);
    let tau = &config.weight_spec;
    let psi: &WeightFunction = config.psi.as_ref().expect("validated");

    let tree =
        tree_derivative_identity(tau, psi, config.d, &config.h_grid, config.quadrature_cells)?;
    let mut rows = Table::new(&["h", "f", "f_fd", "inner_product"]);
    for r in &tree.rows {
        rows.push(vec![r.h, r.f, r.f_fd, r.inner_product]);
    }
    b.tables.insert("tree_derivative".into(), rows);
    b.verdict(
        rule(config, "tree-midpoint-concavity"),
        tree.max_midpoint_excess <= t.midpoint_tolerance,
        tree.max_midpoint_excess,
        t.midpoint_tolerance,
        format!(
            "largest chord-minus-midpoint excess of mu(tau + h psi) over {} grid pairs",
            tree.midpoint_pairs
        ),
    );
    b.verdict(
        rule(config, "tree-derivative-identity"),
        tree.max_derivative_discrepancy <= t.derivative_tolerance,
        tree.max_derivative_discrepancy,
        t.derivative_tolerance,
        format!(
            "largest |central difference - <psi, sigma_star>| over {} grid points ({} in the atom case skipped)",
            tree.rows.len(),
            tree.excluded_h.len()
        ),
    );

    if let Some(p) = &config.lattice_probe {
        let probe = LatticeProbe {
            dimension: p.d,
            xi: p.xi.clone(),
            n: p.n,
            replicas: p.replicas,
            seed: config.seed,
            box_factor: config.box_factor,
        };
        let lattice = lattice_concavity_probe(tau, psi, &config.h_grid, &probe)?;
        let mut rows = Table::new(&["h", "f", "ci_lo", "ci_hi", "statistic"]);
        for r in &lattice.rows {
            rows.push(vec![r.h, r.f, r.ci_lo, r.ci_hi, r.inner_product]);
        }
        b.tables.insert("lattice_concavity".into(), rows);
        let mut slopes = Table::new(&[
            "h_lo",
            "h_hi",
            "slope",
            "statistic",
            "difference_lo",
            "difference_hi",
            "agrees",
        ]);
        for s in &lattice.slope_checks {
            slopes.push(vec![
                s.h_lo,
                s.h_hi,
                s.slope.mean,
                s.statistic.mean,
                s.difference.ci_lo,
                s.difference.ci_hi,
                if s.agrees { 1.0 } else { 0.0 },
            ]);
        }
        b.tables.insert("lattice_slopes".into(), slopes);
        let pairs = p.replicas * config.h_grid.len().saturating_sub(1);
        if let Some(v) = lattice.monotonicity_violations {
            if psi.summarize(1024).essential_infimum >= 0.0 {
                b.verdict(
                    rule(config, "lattice-coupled-monotonicity"),
                    v == 0,
                    v as f64,
                    0.0,
                    format!("replica/step pairs where T decreased in h, out of {pairs}"),
                );
            }
        }
        if let Some(v) = lattice.sandwich_violations {
            b.verdict(
                rule(config, "lattice-pathwise-sandwich"),
                v == 0,
                v as f64,
                0.0,
                format!(
                    "replica/step pairs outside the geodesic-statistic sandwich, out of {pairs}"
                ),
            );
        }
        b.results.insert(
            "lattice_midpoint_violations".into(),
            lattice.midpoint_violations as f64,
        );
    }
    Ok(b.finish(config))
}
