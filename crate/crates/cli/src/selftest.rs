//! Exact oracle checks shipped with the binary.

use fpp_lab_core::lattice::oracle::enumerate_paths;
use fpp_lab_core::lattice::{BoxSpec, LatticeEnvironment, LatticePoint};
use fpp_lab_core::measures::oracle::{transport_lp, wasserstein_cdf};
use fpp_lab_core::measures::{
    total_variation, wasserstein, DiscreteMeasure, GriddedDensity, Quadrature, DEFAULT_GRID,
};
use fpp_lab_core::rng::{hash_words, unit_from_bits};
use fpp_lab_core::tree::oracle::enumerate_minimum;
use fpp_lab_core::tree::TreeEnvironment;
use fpp_lab_core::weights::WeightFunction;

use crate::config::{ExperimentConfig, ExperimentKind, Thresholds};
use crate::report::ExperimentReport;
use crate::run::Builder;

const PAIR_DOMAIN: u64 = 0x5041_4952_5445_5354;
pub const TRANSPORT_TOLERANCE: f64 = 1e-10;
pub const KL_TOLERANCE: f64 = 1e-6;

/// Deterministic probability measure with 1 to 5 atoms. Locations sit on a
/// 1/16 grid half the time so that coincident breakpoints get exercised.
pub fn random_measure(seed: u64, index: u64, side: u64) -> DiscreteMeasure {
    let draw = |k: u64| unit_from_bits(hash_words(seed, PAIR_DOMAIN, &[index, side, k]));
    let atoms = 1 + (draw(0) * 5.0) as usize;
    let gridded = draw(1) < 0.5;
    let raw: Vec<(f64, f64)> = (0..atoms as u64)
        .map(|k| {
            let x = draw(2 + 2 * k);
            let x = if gridded {
                (x * 16.0).floor() / 16.0
            } else {
                x
            };
            (x, 0.05 + draw(3 + 2 * k))
        })
        .collect();
    let total: f64 = raw.iter().map(|a| a.1).sum();
    DiscreteMeasure::new(raw.into_iter().map(|(x, w)| (x, w / total)).collect())
        .expect("valid by construction")
        .normalize()
}

/// Largest disagreement between the quantile formula, the transport LP and
/// the CDF formula over `pairs` random pairs, and the count of pairs where
/// `W > TV` (impossible on `[0,1]`).
pub fn transport_check(seed: u64, pairs: usize) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut ordering = 0;
    for i in 0..pairs as u64 {
        let (a, b) = (random_measure(seed, i, 0), random_measure(seed, i, 1));
        let quantile = wasserstein(&a, &b).expect("probability measures");
        let lp = transport_lp(&a, &b).expect("equal masses");
        worst = worst
            .max((quantile - lp).abs())
            .max((quantile - wasserstein_cdf(&a, &b)).abs());
        if quantile > total_variation(&a, &b).expect("probability measures") + TRANSPORT_TOLERANCE {
            ordering += 1;
        }
    }
    (worst, ordering)
}

/// KL of `e^{−u}/(1−e^{−1})` against its closed form, and KL of the uniform
/// density.
pub fn kl_check() -> (f64, f64) {
    let q = Quadrature::uniform(DEFAULT_GRID);
    let z = 1.0 - (-1.0f64).exp();
    let tilted = GriddedDensity::from_fn(&q, |u| (-u).exp() / z).expect("normalized");
    // E[U] = (1 − 2/e)/z and KL = −E[U] − log z.
    let mean = (1.0 - 2.0 * (-1.0f64).exp()) / z;
    let closed = -mean - z.ln();
    let uniform = GriddedDensity::uniform(DEFAULT_GRID).kl_divergence();
    ((tilted.kl_divergence() - closed).abs(), uniform.abs())
}

/// Branch-and-bound against full enumeration; returns mismatches and cases.
pub fn tree_oracle_check(seeds: u64, max_depth: [usize; 2]) -> (usize, usize) {
    let laws = [
        WeightFunction::identity(),
        WeightFunction::two_atom(0.3, 0.0, 1.0).expect("valid"),
    ];
    let mut mismatches = 0;
    let mut cases = 0;
    for tau in &laws {
        for (d, depth) in [(2usize, max_depth[0]), (3, max_depth[1])] {
            for seed in 0..seeds {
                let env = TreeEnvironment::new(d, seed, tau.clone()).expect("valid arity");
                for n in 1..=depth {
                    cases += 1;
                    let (t, label) = enumerate_minimum(&env, n);
                    match env.tree_minimum(n) {
                        Ok(rec) if rec.t_n.to_bits() == t.to_bits() && rec.label == label => {}
                        _ => mismatches += 1,
                    }
                }
            }
        }
    }
    (mismatches, cases)
}

/// Dijkstra against self-avoiding path enumeration on the 3×3 box around
/// the origin, every target, identity weights; returns mismatches and cases.
pub fn lattice_oracle_check(seeds: u64) -> (usize, usize) {
    let bx = BoxSpec::fixed(1).expect("positive half width");
    let origin = LatticePoint::origin(2);
    let mut mismatches = 0;
    let mut cases = 0;
    for seed in 0..seeds {
        let env = LatticeEnvironment::new(2, seed, WeightFunction::identity(), 2.0).expect("valid");
        for x in -1..=1 {
            for y in -1..=1 {
                let target = LatticePoint(vec![x, y]);
                cases += 1;
                let census = enumerate_paths(&env, &bx, &origin, &target);
                match env.passage_time_in(&bx, &origin, &target) {
                    Ok(rec) if (rec.passage_time - census.passage_time).abs() < 1e-12 => {}
                    _ => mismatches += 1,
                }
            }
        }
    }
    (mismatches, cases)
}

fn measure_verdicts(b: &mut Builder, config: &ExperimentConfig) {
    let rule = |name: &str| format!("{}/{}", config.kind, name);
    let pairs = config.replicas.max(1);
    let (worst, ordering) = transport_check(config.seed, pairs);
    b.verdict(
        rule("quantile-matches-transport-lp"),
        worst <= TRANSPORT_TOLERANCE,
        worst,
        TRANSPORT_TOLERANCE,
        format!("largest disagreement among quantile, LP and CDF routes over {pairs} random pairs"),
    );
    b.verdict(
        rule("wasserstein-below-total-variation"),
        ordering == 0,
        ordering as f64,
        0.0,
        format!("pairs on [0,1] with W > TV, out of {pairs}"),
    );
    let (kl_err, uniform) = kl_check();
    b.verdict(
        rule("kl-closed-form"),
        kl_err <= KL_TOLERANCE,
        kl_err,
        KL_TOLERANCE,
        "gridded KL of the unit-rate tilted density against its closed form".into(),
    );
    b.verdict(
        rule("kl-uniform-is-zero"),
        uniform <= 1e-12,
        uniform,
        1e-12,
        "gridded KL of the uniform density".into(),
    );
}

/// The `measure-selftest` experiment. `replicas` sets the number of random
/// pairs.
pub fn measure_suite(config: &ExperimentConfig) -> ExperimentReport {
    let mut b = Builder::new(config.thresholds.confidence, 0);
    measure_verdicts(&mut b, config);
    b.finish(config)
}

/// Everything `fpp-lab selftest` runs: the measure suite plus small tree and
/// lattice oracle sweeps.
pub fn full(seed: u64) -> ExperimentReport {
    let config = ExperimentConfig {
        name: Some("selftest".into()),
        kind: ExperimentKind::MeasureSelftest,
        weight_spec: WeightFunction::identity(),
        d: 2,
        n_list: Vec::new(),
        xi: None,
        replicas: 500,
        seed,
        box_factor: 2.0,
        output_dir: None,
        node_budget: None,
        quadrature_cells: DEFAULT_GRID,
        thresholds: Thresholds::default(),
        weight_suite: Vec::new(),
        psi: None,
        h_grid: Vec::new(),
        lattice_probe: None,
        abs_cont: None,
        length_extremes: false,
        dump_edges: false,
    };
    let mut b = Builder::new(config.thresholds.confidence, 0);
    measure_verdicts(&mut b, &config);
    let (mismatches, cases) = tree_oracle_check(5, [10, 6]);
    b.verdict(
        "selftest/tree-branch-and-bound".into(),
        mismatches == 0,
        mismatches as f64,
        0.0,
        format!("mismatches against full enumeration in {cases} cases"),
    );
    let (mismatches, cases) = lattice_oracle_check(20);
    b.verdict(
        "selftest/lattice-dijkstra".into(),
        mismatches == 0,
        mismatches as f64,
        0.0,
        format!("mismatches against path enumeration in {cases} cases"),
    );
    b.finish(&config)
}
