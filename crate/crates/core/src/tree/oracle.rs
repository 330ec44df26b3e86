//! Full enumeration of the `d^n` leaves, as a reference for branch and bound.

use super::TreeEnvironment;

/// `(T_n, label)` by visiting every leaf in lexicographic order. Each vertex
/// weight is rehashed from its full label.
pub fn enumerate_minimum(env: &TreeEnvironment, n: usize) -> (f64, Vec<u32>) {
    let mut best = (f64::INFINITY, Vec::new());
    let mut label = Vec::with_capacity(n);
    walk(env, n, 0.0, &mut label, &mut best);
    best
}

fn walk(
    env: &TreeEnvironment,
    n: usize,
    partial: f64,
    label: &mut Vec<u32>,
    best: &mut (f64, Vec<u32>),
) {
    if label.len() == n {
        if partial < best.0 {
            *best = (partial, label.clone());
        }
        return;
    }
    for k in 0..env.arity() as u32 {
        label.push(k);
        let w = env.vertex_weight(label);
        walk(env, n, partial + w, label, best);
        label.pop();
    }
}
