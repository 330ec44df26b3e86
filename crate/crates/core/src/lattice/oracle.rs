//! Exhaustive self-avoiding path enumeration inside small boxes.
//!
//! Exponential in the box size; only meant as a reference on boxes of a few
//! dozen vertices.

use super::{BoxSpec, EdgeKey, LatticeEnvironment, LatticePoint, TIE_TOLERANCE};

/// Everything the enumeration learns about paths from `source` to `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathCensus {
    /// Minimum over paths of the left-to-right edge-weight sum.
    pub passage_time: f64,
    /// Fewest and most edges among paths within the tie tolerance of the minimum.
    pub n_min: usize,
    pub n_max: usize,
    pub geodesic_count: usize,
    pub paths: usize,
}

pub fn enumerate_paths(
    env: &LatticeEnvironment,
    bx: &BoxSpec,
    source: &LatticePoint,
    target: &LatticePoint,
) -> PathCensus {
    let mut sums: Vec<(f64, usize)> = Vec::new();
    let mut on_path = vec![source.clone()];
    walk(env, bx, target, 0.0, &mut on_path, &mut sums);
    let best = sums.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tol = TIE_TOLERANCE * best;
    let geodesics: Vec<usize> = sums
        .iter()
        .filter(|s| (s.0 - best).abs() <= tol)
        .map(|s| s.1)
        .collect();
    PathCensus {
        passage_time: best,
        n_min: geodesics.iter().copied().min().unwrap_or(0),
        n_max: geodesics.iter().copied().max().unwrap_or(0),
        geodesic_count: geodesics.len(),
        paths: sums.len(),
    }
}

fn walk(
    env: &LatticeEnvironment,
    bx: &BoxSpec,
    target: &LatticePoint,
    partial: f64,
    on_path: &mut Vec<LatticePoint>,
    sums: &mut Vec<(f64, usize)>,
) {
    let here = on_path.last().expect("nonempty path").clone();
    if &here == target {
        sums.push((partial, on_path.len() - 1));
        return;
    }
    for axis in 0..here.dimension() {
        for step in [-1i64, 1] {
            let mut next = here.clone();
            next.0[axis] += step;
            if !bx.contains(&next) || on_path.contains(&next) {
                continue;
            }
            let edge = EdgeKey::between(&here, &next).expect("neighbours");
            let w = env.edge_weight(&edge, bx).expect("edge inside box");
            on_path.push(next);
            walk(env, bx, target, partial + w, on_path, sums);
            on_path.pop();
        }
    }
}
