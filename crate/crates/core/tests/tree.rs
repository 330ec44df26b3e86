use fpp_lab_core::tree::oracle::enumerate_minimum;
use fpp_lab_core::tree::{tree_min_monte_carlo, TreeEnvironment};
use fpp_lab_core::weights::{ShiftMode, WeightFunction};

fn laws() -> Vec<WeightFunction> {
    vec![
        WeightFunction::identity(),
        WeightFunction::two_atom(0.3, 0.0, 1.0).unwrap(),
        WeightFunction::atoms(vec![1.0, 2.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap(),
        WeightFunction::identity().shift(-0.1, ShiftMode::AddEverywhere),
        WeightFunction::exponential(1.0),
    ]
}

#[test]
fn branch_and_bound_matches_enumeration() {
    for tau in laws() {
        for d in [2usize, 3] {
            let depth_max = if d == 2 { 12 } else { 8 };
            for seed in 0..10 {
                let env = TreeEnvironment::new(d, seed, tau.clone()).unwrap();
                for n in 1..=depth_max {
                    let rec = env.tree_minimum(n).unwrap();
                    let (t, label) = enumerate_minimum(&env, n);
                    assert_eq!(
                        rec.t_n.to_bits(),
                        t.to_bits(),
                        "{tau:?} d={d} seed={seed} n={n}"
                    );
                    assert_eq!(
                        rec.label, label,
                        "tie-break differs: {tau:?} d={d} seed={seed} n={n}"
                    );
                }
            }
        }
    }
}

#[test]
fn record_matches_its_measures() {
    let tau = WeightFunction::square();
    let env = TreeEnvironment::new(2, 4, tau.clone()).unwrap();
    let rec = env.tree_minimum(15).unwrap();
    assert_eq!(
        rec.weights.iter().fold(0.0, |a, w| a + w).to_bits(),
        rec.t_n.to_bits()
    );
    let (sigma, nu) = rec.empirical_measures().unwrap();
    assert_eq!(sigma.pushforward(&tau).unwrap(), nu);
    assert!((15.0 * nu.integrate(|t| t) - rec.t_n).abs() < 1e-12);
}

#[test]
fn constant_law_gives_degenerate_measures() {
    let env = TreeEnvironment::new(2, 1, WeightFunction::constant(2.5)).unwrap();
    let rec = env.tree_minimum(7).unwrap();
    let (_, nu) = rec.empirical_measures().unwrap();
    let atoms = nu.canonicalize().atoms().to_vec();
    assert_eq!(atoms.len(), 1);
    assert_eq!(atoms[0].0, 2.5);
    assert!((atoms[0].1 - 1.0).abs() < 1e-12);
}

#[test]
fn normalized_minimum_concentrates_with_depth() {
    let tau = WeightFunction::identity();
    let sds: Vec<f64> = [10, 15, 20]
        .iter()
        .map(|&n| {
            tree_min_monte_carlo(2, &tau, n, 200, 21, 1_000_000_000)
                .unwrap()
                .summary
                .sd
        })
        .collect();
    assert!(sds[0] > sds[1] && sds[1] > sds[2], "{sds:?}");
}

#[test]
fn critical_zero_atom_drives_the_minimum_down() {
    // P(τ = 0) = 1/d: the zero-weight subtree is a critical Galton–Watson tree.
    let tau = WeightFunction::two_atom(0.5, 0.0, 1.0).unwrap();
    let means: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&n| {
            tree_min_monte_carlo(2, &tau, n, 100, 8, 1_000_000_000)
                .unwrap()
                .summary
                .mean
        })
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    eprintln!("critical zero atom, mean T_n/n at n = 5, 10, 20: {means:?}");
    assert!(means[2] < 0.15, "{means:?}");
}
