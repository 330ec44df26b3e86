use fpp_lab_core::lattice::oracle::enumerate_paths;
use fpp_lab_core::lattice::{
    absolute_continuity_check, AbsContConfig, BoxSpec, EdgeKey, LatticeEnvironment, LatticePoint,
};
use fpp_lab_core::rng::replica_seed;
use fpp_lab_core::stats::Summary;
use fpp_lab_core::weights::WeightFunction;
use proptest::prelude::*;

fn p(c: &[i64]) -> LatticePoint {
    LatticePoint(c.to_vec())
}

fn box_points(h: i64) -> Vec<LatticePoint> {
    let mut v = Vec::new();
    for x in -h..=h {
        for y in -h..=h {
            v.push(p(&[x, y]));
        }
    }
    v
}

#[test]
fn dijkstra_matches_enumeration_on_three_by_three() {
    let bx = BoxSpec::fixed(1).unwrap();
    let origin = p(&[0, 0]);
    for seed in 0..100 {
        let env = LatticeEnvironment::new(2, seed, WeightFunction::identity(), 2.0).unwrap();
        for target in box_points(1) {
            let rec = env.passage_time_in(&bx, &origin, &target).unwrap();
            let census = enumerate_paths(&env, &bx, &origin, &target);
            assert_eq!(
                rec.passage_time, census.passage_time,
                "seed {seed} target {target:?}"
            );
            rec.check_invariants(env.tau()).unwrap();
        }
    }
}

#[test]
fn length_extremes_match_enumeration_for_two_valued_weights() {
    let bx = BoxSpec::fixed(2).unwrap();
    let tau = WeightFunction::two_atom(0.5, 1.0, 2.0).unwrap();
    let (s, t) = (p(&[-2, -1]), p(&[1, 2]));
    for seed in 0..6 {
        let env = LatticeEnvironment::new(2, seed, tau.clone(), 2.0).unwrap();
        let ex = env.geodesic_length_extremes(&bx, &s, &t).unwrap();
        let census = enumerate_paths(&env, &bx, &s, &t);
        assert!(ex.n_max_exact);
        assert_eq!(ex.passage_time, census.passage_time);
        assert_eq!(
            (ex.n_min, ex.n_max),
            (census.n_min, census.n_max),
            "seed {seed}"
        );
        assert_eq!(ex.geodesic_count, Some(census.geodesic_count as f64));
        let rec = env.passage_time_in(&bx, &s, &t).unwrap();
        assert_eq!(rec.length, ex.n_min);
    }
}

#[test]
fn zero_weight_cycles_give_flagged_lower_bounds() {
    let bx = BoxSpec::fixed(2).unwrap();
    let tau = WeightFunction::two_atom(0.5, 0.0, 1.0).unwrap();
    let (s, t) = (p(&[-2, -1]), p(&[1, 2]));
    let mut flagged = 0;
    for seed in 0..6 {
        let env = LatticeEnvironment::new(2, seed, tau.clone(), 2.0).unwrap();
        let ex = env.geodesic_length_extremes(&bx, &s, &t).unwrap();
        let census = enumerate_paths(&env, &bx, &s, &t);
        assert_eq!(ex.n_min, census.n_min);
        if ex.n_max_exact {
            assert_eq!(ex.n_max, census.n_max);
        } else {
            flagged += 1;
            assert!(census.n_min <= ex.n_max && ex.n_max <= census.n_max);
        }
    }
    assert!(flagged > 0);
}

#[test]
fn atomless_weights_have_unique_geodesic_lengths() {
    let bx = BoxSpec::fixed(6).unwrap();
    for seed in 0..10 {
        let env = LatticeEnvironment::new(2, seed, WeightFunction::identity(), 2.0).unwrap();
        let ex = env
            .geodesic_length_extremes(&bx, &p(&[0, 0]), &p(&[4, 3]))
            .unwrap();
        assert_eq!(ex.n_min, ex.n_max);
        assert_eq!(ex.geodesic_count, Some(1.0));
    }
}

#[test]
fn edge_weight_mean_is_one_half() {
    let env = LatticeEnvironment::new(2, 8, WeightFunction::identity(), 2.0).unwrap();
    let n = 1_000_000;
    let mut sum = 0.0;
    for i in 0..1000i64 {
        for j in 0..500i64 {
            for axis in 0..2 {
                sum += env.edge_uniform(&EdgeKey {
                    base: p(&[i, j]),
                    axis,
                });
            }
        }
    }
    let mean = sum / n as f64;
    assert!((mean - 0.5).abs() < 3.0 * (1.0 / 12.0 / n as f64).sqrt());
}

#[test]
fn time_constant_is_strictly_between_zero_and_one() {
    let n = 200.0;
    let values: Vec<f64> = (0..50)
        .map(|i| {
            let env =
                LatticeEnvironment::new(2, replica_seed(4, i), WeightFunction::identity(), 2.0)
                    .unwrap();
            env.passage_time_to_direction(n, &[1.0, 0.0])
                .unwrap()
                .passage_time
                / n
        })
        .collect();
    let s = Summary::of(&values);
    assert!(s.ci_lo > 0.0 && s.ci_hi < 1.0, "{s:?}");
}

#[test]
fn larger_boxes_rarely_change_the_passage_time() {
    let env = LatticeEnvironment::new(2, 0, WeightFunction::constant(1.0), 2.0).unwrap();
    assert!(
        env.boxed_sensitivity_check(15.0, &[0.6, 0.8])
            .unwrap()
            .agrees
    );
    let agreements = (0..20)
        .filter(|&i| {
            let env =
                LatticeEnvironment::new(2, replica_seed(1, i), WeightFunction::identity(), 2.0)
                    .unwrap();
            env.boxed_sensitivity_check(100.0, &[1.0, 0.0])
                .unwrap()
                .agrees
        })
        .count();
    assert!(agreements >= 19, "{agreements}/20");
}

#[test]
fn tight_box_touches_boundary() {
    let env = LatticeEnvironment::new(2, 2, WeightFunction::identity(), 1.0).unwrap();
    let r = env.passage_time_to_direction(5.0, &[1.0, 0.0]).unwrap();
    // The target itself sits on the boundary of [−5, 5]².
    assert!(r.touches_boundary);
    assert_eq!(
        env.boxed_sensitivity_check(5.0, &[1.0, 0.0])
            .unwrap()
            .touches_boundary,
        r.touches_boundary
    );
}

#[test]
fn geodesics_in_three_dimensions() {
    let env = LatticeEnvironment::new(3, 6, WeightFunction::exponential(1.0), 2.0).unwrap();
    let r = env.passage_time(&p(&[0, 0, 0]), &p(&[4, -3, 2])).unwrap();
    assert!(r.length >= 9);
    r.check_invariants(env.tau()).unwrap();
}

#[test]
fn absolute_continuity_sampler_counts_pairs() {
    let cfg = AbsContConfig {
        dimension: 2,
        n: 30.0,
        xi: vec![1.0, 0.0],
        box_factor: 2.0,
        replicas: 4,
        intervals_per_geodesic: 6,
        interval_lengths: vec![1e-2, 1e-3],
        min_length: 10,
        seed: 1,
    };
    let report = absolute_continuity_check(&WeightFunction::identity(), &cfg).unwrap();
    assert_eq!(report.pairs, 24);
    assert!(report
        .samples
        .iter()
        .all(|s| s.mass >= 0.0 && s.mass <= 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality(seed in any::<u64>(), c in prop::collection::vec(-4i64..=4, 6)) {
        let env = LatticeEnvironment::new(2, seed, WeightFunction::identity(), 2.0).unwrap();
        let bx = BoxSpec::fixed(5).unwrap();
        let (x, y, z) = (p(&c[0..2]), p(&c[2..4]), p(&c[4..6]));
        let t = |a: &LatticePoint, b: &LatticePoint| env.passage_time_in(&bx, a, b).unwrap().passage_time;
        prop_assert!(t(&x, &z) <= t(&x, &y) + t(&y, &z) + 1e-12);
    }

    #[test]
    fn coupled_monotonicity(seed in any::<u64>(), h in 0.0f64..1.0, x in -6i64..=6, y in -6i64..=6) {
        let low = WeightFunction::identity();
        let high = WeightFunction::identity().perturb(WeightFunction::indicator(0.5, 1.0).unwrap(), h);
        let e1 = LatticeEnvironment::new(2, seed, low, 2.0).unwrap();
        let e2 = LatticeEnvironment::new(2, seed, high, 2.0).unwrap();
        let bx = BoxSpec::fixed(7).unwrap();
        let (o, t) = (p(&[0, 0]), p(&[x, y]));
        prop_assert!(
            e1.passage_time_in(&bx, &o, &t).unwrap().passage_time
                <= e2.passage_time_in(&bx, &o, &t).unwrap().passage_time
        );
    }

    #[test]
    fn produced_geodesics_satisfy_invariants(seed in any::<u64>(), x in -8i64..=8, y in -8i64..=8, zero in 0.0f64..0.7) {
        let tau = WeightFunction::piecewise(vec![zero, 1.0 - zero], vec![0.0, 1.0]).unwrap()
            .perturb(WeightFunction::identity(), 0.5);
        let env = LatticeEnvironment::new(2, seed, tau, 2.0).unwrap();
        let r = env.passage_time(&p(&[0, 0]), &p(&[x, y])).unwrap();
        prop_assert!(r.check_invariants(env.tau()).is_ok(), "{:?}", r.check_invariants(env.tau()));
    }
}
