use fpp_lab_core::weights::{
    calkin_wilf, CountableAtoms, ShiftMode, WeightFunction, DEFAULT_TRUNCATION,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Law CDF `P(τ ≤ t)` from the piece structure (exact for atoms, and exact
/// for monotone continuous pieces via bisection on the piece).
fn structural_cdf(tau: &WeightFunction, t: f64) -> f64 {
    tau.pieces()
        .iter()
        .map(|p| {
            if p.shape.sup() <= t {
                p.len()
            } else if p.shape.inf() > t {
                0.0
            } else {
                let increasing = tau.eval(p.lo + 0.25 * p.len()) <= tau.eval(p.lo + 0.75 * p.len());
                let (mut lo, mut hi) = (p.lo, p.hi);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if (tau.eval(mid) <= t) == increasing {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if increasing {
                    lo - p.lo
                } else {
                    p.hi - lo
                }
            }
        })
        .sum()
}

fn ks_statistic(tau: &WeightFunction, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..samples)
        .map(|_| tau.eval(rng.random::<f64>()))
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = samples as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let f = structural_cdf(tau, xs[i]);
        let f_left = f - atom_mass(tau, xs[i]);
        d = d
            .max((j as f64 / n - f).abs())
            .max((i as f64 / n - f_left).abs());
        i = j;
    }
    d
}

fn atom_mass(tau: &WeightFunction, t: f64) -> f64 {
    tau.pieces()
        .iter()
        .filter(|p| p.shape == fpp_lab_core::weights::Shape::Constant(t))
        .map(|p| p.len())
        .sum()
}

#[test]
fn built_in_families_pass_kolmogorov_smirnov() {
    let families = vec![
        ("identity", WeightFunction::identity()),
        ("square", WeightFunction::square()),
        ("power", WeightFunction::power(0.5)),
        ("affine", WeightFunction::affine(0.5, 2.0)),
        ("exponential", WeightFunction::exponential(2.0)),
        ("uniform", WeightFunction::uniform(1.0, 3.0)),
        (
            "atoms",
            WeightFunction::atoms(vec![2.0, 0.0, 1.0], vec![0.2, 0.5, 0.3]).unwrap(),
        ),
        (
            "piecewise",
            WeightFunction::piecewise(vec![0.6, 0.4], vec![0.0, 1.0]).unwrap(),
        ),
        (
            "countable",
            WeightFunction::CountableAtoms(
                CountableAtoms::dense_discrete(0.3, DEFAULT_TRUNCATION, 1.5).unwrap(),
            ),
        ),
        (
            "shift",
            WeightFunction::identity().shift(0.5, ShiftMode::AddOnPositive),
        ),
    ];
    // Level 0.01 critical value for n = 1e5: 1.628 / √n.
    let n = 100_000;
    let critical = 1.628 / (n as f64).sqrt();
    for (name, tau) in families {
        let d = ks_statistic(&tau, n, 99);
        assert!(d < critical, "{name}: D = {d:.5} ≥ {critical:.5}");
    }
}

#[test]
fn dense_discrete_support_meets_every_interval() {
    let c = CountableAtoms::dense_discrete(0.2, DEFAULT_TRUNCATION, 1.5).unwrap();
    let support: Vec<f64> = c.atoms().iter().skip(1).map(|a| a.0).collect();
    assert_eq!(support.len(), c.truncation());
    // Atom locations are β_i t_i with t_i near 2, so the truncated support is
    // a finite net. Below the largest scale it leaves no gap wider than 3/4.
    let max_beta = calkin_wilf().take(c.truncation()).fold(0.0, f64::max);
    let mut points: Vec<f64> = support.iter().copied().filter(|&x| x <= max_beta).collect();
    points.push(0.0);
    points.sort_by(f64::total_cmp);
    let widest = points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    assert!(widest < 0.75, "gap {widest}");
    assert!(max_beta - points.last().unwrap() < 0.75);
}

#[test]
fn summary_reports_atom_mass_for_two_atom_law() {
    let s = WeightFunction::two_atom(0.5, 0.0, 1.0)
        .unwrap()
        .summarize(100);
    assert_eq!((s.zero_mass, s.atom_at_infimum_mass), (0.5, 0.5));
}

proptest! {
    #[test]
    fn positive_shift_preserves_the_zero_set(
        p in 0.05f64..0.95,
        v in 0.1f64..5.0,
        h in -0.05f64..3.0,
        u in 0.0f64..=1.0,
    ) {
        let base = WeightFunction::piecewise(vec![p, 1.0 - p], vec![0.0, v]).unwrap();
        let shifted = base.clone().shift(h, ShiftMode::AddOnPositive);
        prop_assert_eq!(base.eval(u) == 0.0, shifted.eval(u) == 0.0);
    }

    #[test]
    fn evaluation_is_deterministic_and_nonnegative(u in 0.0f64..=1.0) {
        for tau in [
            WeightFunction::identity(),
            WeightFunction::exponential(1.0),
            WeightFunction::atoms(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap(),
        ] {
            let a = tau.evaluate(u).unwrap();
            prop_assert_eq!(a.to_bits(), tau.evaluate(u).unwrap().to_bits());
            prop_assert!(a >= 0.0);
        }
    }

    #[test]
    fn piecewise_json_round_trip(raw in prop::collection::vec((1u32..100, 0.0f64..10.0), 1..6)) {
        let total: u32 = raw.iter().map(|r| r.0).sum();
        let probs: Vec<f64> = raw.iter().map(|r| r.0 as f64 / total as f64).collect();
        let values: Vec<f64> = raw.iter().map(|r| r.1).collect();
        let tau = WeightFunction::piecewise(probs, values).unwrap();
        let json = serde_json::to_string(&tau).unwrap();
        prop_assert_eq!(serde_json::from_str::<WeightFunction>(&json).unwrap(), tau);
    }
}
