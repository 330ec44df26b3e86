//! Independent reference computations for the transport distances.
//!
//! These are deliberately slow and share no code with the quantile-based
//! implementation, so agreement between the two is meaningful.

use super::{DiscreteMeasure, MeasureError};

const EPS: f64 = 1e-15;

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Optimal transport cost `min_π ∑ π_ij |x_i − y_j|` over all couplings of
/// two probability measures, by successive shortest augmenting paths
/// (Bellman–Ford) on the bipartite transport network.
pub fn transport_lp(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    for m in [a, b] {
        if !m.is_probability() {
            return Err(MeasureError::NotProbability(m.total_mass()));
        }
    }
    let (na, nb) = (a.atoms().len(), b.atoms().len());
    let source = 0;
    let sink = na + nb + 1;
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); sink + 1];
    let mut edges: Vec<Edge> = Vec::new();
    let mut add = |graph: &mut Vec<Vec<usize>>, from: usize, to: usize, cap: f64, cost: f64| {
        graph[from].push(edges.len());
        edges.push(Edge { to, cap, cost });
        graph[to].push(edges.len());
        edges.push(Edge {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
    };
    for (i, &(_, m)) in a.atoms().iter().enumerate() {
        add(&mut graph, source, 1 + i, m, 0.0);
    }
    for (j, &(_, m)) in b.atoms().iter().enumerate() {
        add(&mut graph, 1 + na + j, sink, m, 0.0);
    }
    for (i, &(x, _)) in a.atoms().iter().enumerate() {
        for (j, &(y, _)) in b.atoms().iter().enumerate() {
            add(&mut graph, 1 + i, 1 + na + j, f64::INFINITY, (x - y).abs());
        }
    }

    let nodes = sink + 1;
    let mut total = 0.0;
    loop {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via: Vec<Option<usize>> = vec![None; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &graph[u] {
                    let edge = &edges[e];
                    if edge.cap > EPS && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some(e) = via[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = via[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            total += push * edges[e].cost;
            v = edges[e ^ 1].to;
        }
    }
    Ok(total)
}

/// `∫ |F_a(t) − F_b(t)| dt` over the merged support, the CDF form of W₁.
pub fn wasserstein_cdf(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut points: Vec<f64> = a.atoms().iter().chain(b.atoms()).map(|p| p.0).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let cdf = |m: &DiscreteMeasure, t: f64| m.mass_where(|x| x <= t);
    points
        .windows(2)
        .map(|w| (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0]))
        .sum()
}
