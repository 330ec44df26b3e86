use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fpp_lab_core::lattice::LatticeEnvironment;
use fpp_lab_core::par;
use fpp_lab_core::rng::replica_seed;
use fpp_lab_core::tree::TreeEnvironment;
use fpp_lab_core::weights::WeightFunction;
use std::hint::black_box;

const REPLICAS: usize = 32;

fn tree_replica(i: usize) -> f64 {
    TreeEnvironment::new(2, replica_seed(7, i as u64), WeightFunction::identity())
        .and_then(|env| env.tree_minimum(16))
        .map(|r| r.t_n)
        .unwrap_or(f64::NAN)
}

fn lattice_replica(i: usize) -> f64 {
    LatticeEnvironment::new(
        2,
        replica_seed(7, i as u64),
        WeightFunction::identity(),
        2.0,
    )
    .and_then(|env| env.passage_time_to_direction(60.0, &[1.0, 0.0]))
    .map(|r| r.passage_time)
    .unwrap_or(f64::NAN)
}

type Replica = fn(usize) -> f64;

fn compare(c: &mut Criterion) {
    let cases: [(&str, Replica); 2] =
        [("tree_n16", tree_replica), ("lattice_n60", lattice_replica)];
    for (name, replica) in cases {
        let mut group = c.benchmark_group(name);
        group.sample_size(10);
        group.bench_function(BenchmarkId::new("sequential", REPLICAS), |b| {
            b.iter(|| black_box(par::map_seq(REPLICAS, replica)))
        });
        #[cfg(feature = "parallel")]
        group.bench_function(BenchmarkId::new("rayon", REPLICAS), |b| {
            b.iter(|| black_box(par::map_par(REPLICAS, replica)))
        });
        group.finish();
    }
}

criterion_group!(benches, compare);
criterion_main!(benches);
