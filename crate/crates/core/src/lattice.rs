//! First-passage percolation on `Z^d`, truncated to a finite box.
//!
//! Edge `e` carries `τ(U_e)` where `U_e` is a hash of `(seed, e)`, so the
//! environment is never stored. Passage times come from a lazy Dijkstra
//! search with lexicographic `(T, hops)` keys: among all minimizing paths it
//! returns one of fewest edges, and among those the one whose parents are
//! lexicographically smallest.

pub mod oracle;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{DiscreteMeasure, MeasureError};
use crate::par;
use crate::rng::{
    absorb, hash_words, mix64, replica_seed, unit_from_bits, LATTICE_DOMAIN, PROBE_DOMAIN,
};
use crate::weights::{WeightError, WeightFunction};

/// Default expansion factor `c` of the box `[−⌈cn⌉, ⌈cn⌉]^d`.
pub const DEFAULT_BOX_FACTOR: f64 = 2.0;
/// Default cap on box vertices.
pub const DEFAULT_VERTEX_BUDGET: u64 = 200_000_000;
/// Relative tolerance for geodesic-graph membership.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("box expansion factor must be ≥ 1, got {0}")]
    BadBoxFactor(f64),
    #[error("box half-width must be positive, got {0}")]
    BadHalfWidth(i64),
    #[error("point {0:?} has the wrong dimension")]
    DimensionMismatch(Vec<i64>),
    #[error("{0:?} lies outside the box of half-width {1}")]
    OutOfBox(Vec<i64>, i64),
    #[error("lattice weights must be nonnegative; essential infimum is {0}")]
    NegativeWeight(f64),
    #[error(
        "a box of half-width {half_width} has {vertices} vertices, over the budget of {budget}"
    )]
    MemoryBudget {
        half_width: i64,
        vertices: u128,
        budget: u64,
    },
    #[error("direction {0:?} is not a unit vector")]
    NotUnit(Vec<f64>),
    #[error("target unreachable inside the box")]
    Unreachable,
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn origin(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// `[x]`: the unique lattice point with `x ∈ [x] + [0,1)^d`.
    pub fn floor(x: &[f64]) -> Self {
        Self(x.iter().map(|c| c.floor() as i64).collect())
    }

    /// `[n ξ]`.
    pub fn floor_of(xi: &[f64], n: f64) -> Self {
        Self(xi.iter().map(|c| (n * c).floor() as i64).collect())
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn l1_distance(&self, other: &Self) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn l2_distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn max_abs(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

/// Canonical key of the edge `{base, base + e_axis}`; `base` is the
/// lexicographically smaller endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub base: LatticePoint,
    pub axis: usize,
}

impl EdgeKey {
    /// The key of the edge joining two neighbouring points.
    pub fn between(a: &LatticePoint, b: &LatticePoint) -> Option<Self> {
        if a.dimension() != b.dimension() || a.l1_distance(b) != 1 {
            return None;
        }
        let axis = a.0.iter().zip(&b.0).position(|(x, y)| x != y)?;
        let base = if a < b { a.clone() } else { b.clone() };
        Some(Self { base, axis })
    }

    pub fn head(&self) -> LatticePoint {
        let mut p = self.base.clone();
        p.0[self.axis] += 1;
        p
    }
}

/// The box `[−h, h]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub half_width: i64,
    pub expansion_factor: f64,
}

impl BoxSpec {
    pub fn fixed(half_width: i64) -> Result<Self, LatticeError> {
        if half_width < 1 {
            return Err(LatticeError::BadHalfWidth(half_width));
        }
        Ok(Self {
            half_width,
            expansion_factor: 1.0,
        })
    }

    /// Half-width `⌈c n⌉`.
    pub fn for_distance(n: f64, c: f64) -> Result<Self, LatticeError> {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(LatticeError::BadBoxFactor(c));
        }
        let half_width = ((c * n).ceil() as i64).max(1);
        Ok(Self {
            half_width,
            expansion_factor: c,
        })
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.max_abs() <= self.half_width
    }
}

/// Index arithmetic on a box; coordinate 0 has the largest stride so index
/// order is lexicographic order.
#[derive(Clone, Debug)]
struct Grid {
    d: usize,
    h: i64,
    side: usize,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    fn new(d: usize, spec: &BoxSpec, budget: u64) -> Result<Self, LatticeError> {
        let side = (2 * spec.half_width + 1) as u128;
        let vertices = side.checked_pow(d as u32).unwrap_or(u128::MAX);
        if vertices > budget as u128 {
            return Err(LatticeError::MemoryBudget {
                half_width: spec.half_width,
                vertices,
                budget,
            });
        }
        let side = side as usize;
        let mut strides = vec![1usize; d];
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * side;
        }
        Ok(Self {
            d,
            h: spec.half_width,
            side,
            strides,
            len: vertices as usize,
        })
    }

    fn index(&self, p: &LatticePoint) -> usize {
        p.0.iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c + self.h) as usize * s)
            .sum()
    }

    #[inline]
    fn coord(&self, idx: usize, k: usize) -> i64 {
        ((idx / self.strides[k]) % self.side) as i64 - self.h
    }

    fn point(&self, idx: usize) -> LatticePoint {
        LatticePoint((0..self.d).map(|k| self.coord(idx, k)).collect())
    }

    fn on_boundary(&self, idx: usize) -> bool {
        (0..self.d).any(|k| self.coord(idx, k).abs() == self.h)
    }

    /// Calls `f(neighbour, edge_base, axis)` for each in-box neighbour.
    #[inline]
    fn for_neighbors(&self, idx: usize, mut f: impl FnMut(usize, usize, usize)) {
        for k in 0..self.d {
            let s = self.strides[k];
            let c = (idx / s) % self.side;
            if c + 1 < self.side {
                f(idx + s, idx, k);
            }
            if c > 0 {
                f(idx - s, idx - s, k);
            }
        }
    }
}

/// The i.i.d. environment `τ_e = τ(U_e)` on `Z^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeEnvironment {
    dimension: usize,
    seed: u64,
    tau: WeightFunction,
    box_factor: f64,
    vertex_budget: u64,
}

/// A geodesic with its weights and length statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicRecord {
    pub seed: u64,
    pub source: LatticePoint,
    pub target: LatticePoint,
    /// `(n, ξ)` when the target was `[nξ]`.
    pub n: Option<f64>,
    pub xi: Option<Vec<f64>>,
    pub vertices: Vec<LatticePoint>,
    pub edges: Vec<EdgeKey>,
    pub uniforms: Vec<f64>,
    pub weights: Vec<f64>,
    pub passage_time: f64,
    pub length: usize,
    pub zero_count: usize,
    pub positive_count: usize,
    pub box_half_width: i64,
    pub touches_boundary: bool,
}

impl GeodesicRecord {
    fn scale(&self) -> f64 {
        self.source.l2_distance(&self.target)
    }

    /// `ν_γ = ‖x−y‖₂⁻¹ ∑_{e∈γ} δ_{τ_e}`.
    pub fn nu(&self) -> Result<DiscreteMeasure, MeasureError> {
        if self.length == 0 {
            return Ok(DiscreteMeasure::zero());
        }
        DiscreteMeasure::from_values(&self.weights, 1.0 / self.scale())
    }

    /// `ν̂_γ = |γ|⁻¹ ∑_{e∈γ} δ_{τ_e}`.
    pub fn nu_hat(&self) -> Result<DiscreteMeasure, MeasureError> {
        DiscreteMeasure::empirical(&self.weights)
    }

    /// `ν̂_γ⁺`: the empirical measure of the nonzero weights only.
    pub fn nu_hat_plus(&self) -> Result<DiscreteMeasure, MeasureError> {
        let positive: Vec<f64> = self.weights.iter().copied().filter(|w| *w != 0.0).collect();
        DiscreteMeasure::empirical(&positive)
    }

    /// `σ_γ = ‖x−y‖₂⁻¹ ∑_{e∈γ} δ_{U_e}`.
    pub fn sigma(&self) -> Result<DiscreteMeasure, MeasureError> {
        if self.length == 0 {
            return Ok(DiscreteMeasure::zero());
        }
        DiscreteMeasure::from_values(&self.uniforms, 1.0 / self.scale())
    }

    /// `σ̂_γ`, the normalized `σ_γ`.
    pub fn sigma_hat(&self) -> Result<DiscreteMeasure, MeasureError> {
        DiscreteMeasure::empirical(&self.uniforms)
    }

    /// `ν̂_γ({0}) = |γ|₀ / |γ|`.
    pub fn zero_fraction(&self) -> f64 {
        if self.length == 0 {
            0.0
        } else {
            self.zero_count as f64 / self.length as f64
        }
    }

    /// Checks self-avoidance, the length decomposition, and both passage-time
    /// identities. Returns a description of the first failure.
    pub fn check_invariants(&self, tau: &WeightFunction) -> Result<(), String> {
        let mut seen: Vec<&LatticePoint> = self.vertices.iter().collect();
        seen.sort();
        seen.dedup();
        if seen.len() != self.vertices.len() {
            return Err("path revisits a vertex".into());
        }
        if self.length != self.zero_count + self.positive_count {
            return Err("|γ| ≠ |γ|₀ + |γ|₊".into());
        }
        let sum = self.weights.iter().fold(0.0, |a, w| a + w);
        if sum.to_bits() != self.passage_time.to_bits() {
            return Err(format!("edge sum {sum} ≠ T {}", self.passage_time));
        }
        if self.length == 0 {
            return Ok(());
        }
        let close =
            |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let nu_hat = self.nu_hat().map_err(|e| e.to_string())?;
        let via_nu = self.length as f64 * nu_hat.integrate(|t| t);
        if !close(via_nu, self.passage_time) {
            return Err(format!("|γ|⟨t,ν̂⟩ = {via_nu} ≠ T"));
        }
        let sigma = self.sigma().map_err(|e| e.to_string())?;
        let via_sigma = sigma.integrate(|u| tau.eval(u));
        let expected = self.passage_time / self.scale();
        if !close(via_sigma, expected) {
            return Err(format!("⟨τ,σ_γ⟩ = {via_sigma} ≠ T/‖x−y‖ = {expected}"));
        }
        Ok(())
    }

    /// Edges in path order, oriented from source to target.
    pub fn edge_rows(&self) -> impl Iterator<Item = EdgeRow> + '_ {
        self.vertices
            .windows(2)
            .zip(self.uniforms.iter().zip(&self.weights))
            .enumerate()
            .map(|(step, (pair, (&uniform, &weight)))| EdgeRow {
                step,
                from: pair[0].0.clone(),
                to: pair[1].0.clone(),
                uniform,
                weight,
            })
    }

    pub fn summary(&self, extremes: Option<&LengthExtremes>) -> GeodesicSummary {
        GeodesicSummary {
            seed: self.seed,
            n: self.n,
            xi: self.xi.clone(),
            passage_time: self.passage_time,
            length: self.length,
            zero_count: self.zero_count,
            positive_count: self.positive_count,
            n_min: extremes.map(|e| e.n_min),
            n_max: extremes.map(|e| e.n_max),
            n_max_exact: extremes.map(|e| e.n_max_exact),
            touches_boundary: self.touches_boundary,
        }
    }
}

/// One edge of a geodesic dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub step: usize,
    pub from: Vec<i64>,
    pub to: Vec<i64>,
    pub uniform: f64,
    pub weight: f64,
}

/// Per-run summary of a geodesic, with length extremes when computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSummary {
    pub seed: u64,
    pub n: Option<f64>,
    pub xi: Option<Vec<f64>>,
    pub passage_time: f64,
    pub length: usize,
    pub zero_count: usize,
    pub positive_count: usize,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub n_max_exact: Option<bool>,
    pub touches_boundary: bool,
}

/// `N̲` and `N̄`: shortest and longest geodesic lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthExtremes {
    pub passage_time: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// False when zero-weight cycles forced a lower bound for `n_max`.
    pub n_max_exact: bool,
    /// Number of geodesics, when the geodesic graph is acyclic.
    pub geodesic_count: Option<f64>,
}

/// Outcome of recomputing with a larger box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub passage_time: f64,
    pub passage_time_larger_box: f64,
    pub agrees: bool,
    pub touches_boundary: bool,
    pub half_width: i64,
    pub half_width_larger_box: i64,
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry {
    t: f64,
    hops: u32,
    idx: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // Reversed, so the max-heap pops the smallest key.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.hops.cmp(&self.hops))
            .then(other.idx.cmp(&self.idx))
    }
}

const NO_PARENT: u32 = u32::MAX;

struct ShortestPaths {
    dist: Vec<f64>,
    hops: Vec<u32>,
    parent: Vec<u32>,
    done: Vec<bool>,
}

impl LatticeEnvironment {
    pub fn new(
        dimension: usize,
        seed: u64,
        tau: WeightFunction,
        box_factor: f64,
    ) -> Result<Self, LatticeError> {
        if dimension < 2 {
            return Err(LatticeError::BadDimension(dimension));
        }
        if !(box_factor >= 1.0 && box_factor.is_finite()) {
            return Err(LatticeError::BadBoxFactor(box_factor));
        }
        tau.validate()?;
        let b = tau.summarize(1024).essential_infimum;
        if b < 0.0 {
            return Err(LatticeError::NegativeWeight(b));
        }
        Ok(Self {
            dimension,
            seed,
            tau,
            box_factor,
            vertex_budget: DEFAULT_VERTEX_BUDGET,
        })
    }

    pub fn with_vertex_budget(mut self, budget: u64) -> Self {
        self.vertex_budget = budget;
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut env = self.clone();
        env.seed = seed;
        env
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tau(&self) -> &WeightFunction {
        &self.tau
    }

    pub fn box_factor(&self) -> f64 {
        self.box_factor
    }

    /// `U_e`, a pure function of `(seed, e)`.
    pub fn edge_uniform(&self, edge: &EdgeKey) -> f64 {
        let mut words: Vec<u64> = edge.base.0.iter().map(|&c| c as u64).collect();
        words.push(edge.axis as u64);
        unit_from_bits(hash_words(self.seed, LATTICE_DOMAIN, &words))
    }

    /// `τ(U_e)` for an edge inside `bx`.
    pub fn edge_weight(&self, edge: &EdgeKey, bx: &BoxSpec) -> Result<f64, LatticeError> {
        if edge.base.dimension() != self.dimension || edge.axis >= self.dimension {
            return Err(LatticeError::DimensionMismatch(edge.base.0.clone()));
        }
        for p in [&edge.base, &edge.head()] {
            if !bx.contains(p) {
                return Err(LatticeError::OutOfBox(p.0.clone(), bx.half_width));
            }
        }
        Ok(self.tau.eval(self.edge_uniform(edge)))
    }

    /// Same value as `edge_uniform`, computed from a box index without allocating.
    #[inline]
    fn uniform_at(&self, grid: &Grid, base: usize, axis: usize) -> f64 {
        let mut state = mix64(self.seed ^ LATTICE_DOMAIN);
        for k in 0..grid.d {
            state = absorb(state, grid.coord(base, k) as u64);
        }
        unit_from_bits(absorb(state, axis as u64))
    }

    fn check_point(&self, p: &LatticePoint, bx: &BoxSpec) -> Result<(), LatticeError> {
        if p.dimension() != self.dimension {
            return Err(LatticeError::DimensionMismatch(p.0.clone()));
        }
        if !bx.contains(p) {
            return Err(LatticeError::OutOfBox(p.0.clone(), bx.half_width));
        }
        Ok(())
    }

    /// Default box for a pair of points: half-width `⌈c·max|coord|⌉`.
    pub fn default_box(
        &self,
        source: &LatticePoint,
        target: &LatticePoint,
    ) -> Result<BoxSpec, LatticeError> {
        let reach = source.max_abs().max(target.max_abs()) as f64;
        BoxSpec::for_distance(reach, self.box_factor)
    }

    /// Lexicographic `(T, hops)` Dijkstra from `source`. Stops once `stop`
    /// is settled, or once keys exceed `limit`.
    fn dijkstra(
        &self,
        grid: &Grid,
        source: usize,
        stop: Option<usize>,
        limit: f64,
    ) -> ShortestPaths {
        let mut sp = ShortestPaths {
            dist: vec![f64::INFINITY; grid.len],
            hops: vec![u32::MAX; grid.len],
            parent: vec![NO_PARENT; grid.len],
            done: vec![false; grid.len],
        };
        let mut heap = BinaryHeap::new();
        sp.dist[source] = 0.0;
        sp.hops[source] = 0;
        heap.push(HeapEntry {
            t: 0.0,
            hops: 0,
            idx: source as u32,
        });
        while let Some(HeapEntry { t, hops, idx }) = heap.pop() {
            let u = idx as usize;
            if sp.done[u] || t != sp.dist[u] || hops != sp.hops[u] {
                continue;
            }
            if t > limit {
                break;
            }
            sp.done[u] = true;
            if Some(u) == stop {
                break;
            }
            grid.for_neighbors(u, |v, base, axis| {
                if sp.done[v] {
                    return;
                }
                let w = self.tau.eval(self.uniform_at(grid, base, axis));
                let ct = t + w;
                let ch = hops + 1;
                let better = match ct.total_cmp(&sp.dist[v]) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => match ch.cmp(&sp.hops[v]) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => (u as u32) < sp.parent[v],
                    },
                };
                if better {
                    let push = ct != sp.dist[v] || ch != sp.hops[v];
                    sp.dist[v] = ct;
                    sp.hops[v] = ch;
                    sp.parent[v] = u as u32;
                    if push {
                        heap.push(HeapEntry {
                            t: ct,
                            hops: ch,
                            idx: v as u32,
                        });
                    }
                }
            });
        }
        sp
    }

    /// `T(source, target)` and its geodesic in the default box.
    pub fn passage_time(
        &self,
        source: &LatticePoint,
        target: &LatticePoint,
    ) -> Result<GeodesicRecord, LatticeError> {
        let bx = self.default_box(source, target)?;
        self.passage_time_in(&bx, source, target)
    }

    /// `T(source, target)` and its geodesic inside `bx`.
    pub fn passage_time_in(
        &self,
        bx: &BoxSpec,
        source: &LatticePoint,
        target: &LatticePoint,
    ) -> Result<GeodesicRecord, LatticeError> {
        self.check_point(source, bx)?;
        self.check_point(target, bx)?;
        let grid = Grid::new(self.dimension, bx, self.vertex_budget)?;
        let s = grid.index(source);
        let t = grid.index(target);
        let sp = self.dijkstra(&grid, s, Some(t), f64::INFINITY);
        if !sp.done[t] {
            return Err(LatticeError::Unreachable);
        }
        let mut path = vec![t];
        let mut v = t;
        while v != s {
            v = sp.parent[v] as usize;
            path.push(v);
        }
        path.reverse();

        let mut edges = Vec::with_capacity(path.len() - 1);
        let mut uniforms = Vec::with_capacity(path.len() - 1);
        let mut weights = Vec::with_capacity(path.len() - 1);
        let mut total = 0.0;
        for pair in path.windows(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            let axis = (0..grid.d)
                .find(|&k| grid.coord(a, k) != grid.coord(b, k))
                .expect("neighbours differ in one coordinate");
            let u = self.uniform_at(&grid, a, axis);
            let w = self.tau.eval(u);
            total += w;
            edges.push(EdgeKey {
                base: grid.point(a),
                axis,
            });
            uniforms.push(u);
            weights.push(w);
        }
        debug_assert_eq!(total.to_bits(), sp.dist[t].to_bits());
        let zero_count = weights.iter().filter(|w| **w == 0.0).count();
        Ok(GeodesicRecord {
            seed: self.seed,
            source: source.clone(),
            target: target.clone(),
            n: None,
            xi: None,
            touches_boundary: path.iter().any(|&i| grid.on_boundary(i)),
            vertices: path.iter().map(|&i| grid.point(i)).collect(),
            length: edges.len(),
            zero_count,
            positive_count: edges.len() - zero_count,
            edges,
            uniforms,
            weights,
            passage_time: total,
            box_half_width: bx.half_width,
        })
    }

    /// `T(0, [nξ])` in the box of half-width `⌈cn⌉`.
    pub fn passage_time_to_direction(
        &self,
        n: f64,
        xi: &[f64],
    ) -> Result<GeodesicRecord, LatticeError> {
        let target = self.direction_target(n, xi)?;
        let bx = BoxSpec::for_distance(n, self.box_factor)?;
        let mut rec = self.passage_time_in(&bx, &LatticePoint::origin(self.dimension), &target)?;
        rec.n = Some(n);
        rec.xi = Some(xi.to_vec());
        Ok(rec)
    }

    fn direction_target(&self, n: f64, xi: &[f64]) -> Result<LatticePoint, LatticeError> {
        let norm = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        if xi.len() != self.dimension || (norm - 1.0).abs() > 1e-9 {
            return Err(LatticeError::NotUnit(xi.to_vec()));
        }
        Ok(LatticePoint::floor_of(xi, n))
    }

    /// `N̲` from the lexicographic search; `N̄` by longest path in the
    /// geodesic graph, or a flagged lower bound when it has cycles.
    pub fn geodesic_length_extremes(
        &self,
        bx: &BoxSpec,
        source: &LatticePoint,
        target: &LatticePoint,
    ) -> Result<LengthExtremes, LatticeError> {
        self.check_point(source, bx)?;
        self.check_point(target, bx)?;
        let grid = Grid::new(self.dimension, bx, self.vertex_budget)?;
        let s = grid.index(source);
        let t = grid.index(target);
        let forward = self.dijkstra(&grid, s, Some(t), f64::INFINITY);
        if !forward.done[t] {
            return Err(LatticeError::Unreachable);
        }
        let total = forward.dist[t];
        let n_min = forward.hops[t] as usize;
        let tol = TIE_TOLERANCE * total;
        let limit = total + tol;
        let forward = self.dijkstra(&grid, s, None, limit);
        let backward = self.dijkstra(&grid, t, None, limit);

        // Geodesic graph on vertices with D(s,v) + D(v,t) ≈ T.
        let mut local: HashMap<usize, usize> = HashMap::new();
        let mut members = Vec::new();
        for v in 0..grid.len {
            if forward.done[v] && backward.done[v] && forward.dist[v] + backward.dist[v] <= limit {
                local.insert(v, members.len());
                members.push(v);
            }
        }
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
        for (i, &u) in members.iter().enumerate() {
            grid.for_neighbors(u, |v, base, axis| {
                if let Some(&j) = local.get(&v) {
                    let w = self.tau.eval(self.uniform_at(&grid, base, axis));
                    if (forward.dist[u] + w + backward.dist[v] - total).abs() <= tol {
                        out[i].push(j);
                    }
                }
            });
        }
        let (ls, lt) = (local[&s], local[&t]);

        if let Some(order) = topological_order(&out) {
            let mut longest = vec![i64::MIN; out.len()];
            let mut count = vec![0f64; out.len()];
            longest[ls] = 0;
            count[ls] = 1.0;
            for &i in &order {
                if longest[i] == i64::MIN {
                    continue;
                }
                for &j in &out[i] {
                    longest[j] = longest[j].max(longest[i] + 1);
                    count[j] += count[i];
                }
            }
            return Ok(LengthExtremes {
                passage_time: total,
                n_min,
                n_max: longest[lt] as usize,
                n_max_exact: true,
                geodesic_count: Some(count[lt]),
            });
        }

        // Contract strongly connected components; every edge between
        // components is used at most once by a simple path.
        let comp = strongly_connected_components(&out);
        let k = comp.iter().max().map_or(0, |m| m + 1);
        let mut cout: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, targets) in out.iter().enumerate() {
            for &j in targets {
                if comp[i] != comp[j] {
                    cout[comp[i]].push(comp[j]);
                }
            }
        }
        let order = topological_order(&cout).expect("condensation is acyclic");
        let mut longest = vec![i64::MIN; k];
        longest[comp[ls]] = 0;
        for &c in &order {
            if longest[c] == i64::MIN {
                continue;
            }
            for &e in &cout[c] {
                longest[e] = longest[e].max(longest[c] + 1);
            }
        }
        Ok(LengthExtremes {
            passage_time: total,
            n_min,
            n_max: (longest[comp[lt]].max(0) as usize).max(n_min),
            n_max_exact: false,
            geodesic_count: None,
        })
    }

    /// Recomputes `T(0,[nξ])` with box factors `c` and `c + 1`.
    pub fn boxed_sensitivity_check(
        &self,
        n: f64,
        xi: &[f64],
    ) -> Result<SensitivityReport, LatticeError> {
        let small = self.passage_time_to_direction(n, xi)?;
        let mut wider = self.clone();
        wider.box_factor += 1.0;
        let large = wider.passage_time_to_direction(n, xi)?;
        Ok(SensitivityReport {
            passage_time: small.passage_time,
            passage_time_larger_box: large.passage_time,
            agrees: small.passage_time == large.passage_time,
            touches_boundary: small.touches_boundary,
            half_width: small.box_half_width,
            half_width_larger_box: large.box_half_width,
        })
    }
}

/// Kahn's algorithm; `None` if the graph has a cycle.
fn topological_order(out: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; out.len()];
    for targets in out {
        for &j in targets {
            indegree[j] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..out.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(out.len());
    while let Some(i) = queue.pop() {
        order.push(i);
        for &j in &out[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push(j);
            }
        }
    }
    (order.len() == out.len()).then_some(order)
}

/// Kosaraju's algorithm with explicit stacks; returns a component id per vertex.
fn strongly_connected_components(out: &[Vec<usize>]) -> Vec<usize> {
    let n = out.len();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, targets) in out.iter().enumerate() {
        for &j in targets {
            incoming[j].push(i);
        }
    }
    let mut visited = vec![false; n];
    let mut finish = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < out[v].len() {
                let w = out[v][*next];
                *next += 1;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                finish.push(v);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next_id = 0;
    for &root in finish.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = next_id;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &incoming[v] {
                if comp[w] == usize::MAX {
                    comp[w] = next_id;
                    stack.push(w);
                }
            }
        }
        next_id += 1;
    }
    comp
}

/// Settings for the absolute-continuity sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsContConfig {
    pub dimension: usize,
    pub n: f64,
    pub xi: Vec<f64>,
    pub box_factor: f64,
    pub replicas: usize,
    pub intervals_per_geodesic: usize,
    /// Interval lengths `Λ(B)`, used in rotation.
    pub interval_lengths: Vec<f64>,
    pub min_length: usize,
    pub seed: u64,
}

/// One `(geodesic, interval)` comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsContSample {
    pub replica: usize,
    pub geodesic_length: usize,
    pub interval_start: f64,
    pub interval_length: f64,
    pub mass: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsContReport {
    pub samples: Vec<AbsContSample>,
    pub pairs: usize,
    pub satisfied: usize,
    pub fraction: f64,
    /// Replicas whose geodesic was shorter than `min_length`.
    pub short_geodesics: usize,
}

/// `2 log(2d+1) / log Λ(B)⁻¹`.
pub fn abs_cont_bound(dimension: usize, interval_length: f64) -> f64 {
    2.0 * ((2 * dimension + 1) as f64).ln() / (1.0 / interval_length).ln()
}

/// Samples `σ̂_γ(B)` on random intervals `B` along geodesics to `[nξ]` and
/// compares each against [`abs_cont_bound`].
pub fn absolute_continuity_check(
    tau: &WeightFunction,
    cfg: &AbsContConfig,
) -> Result<AbsContReport, LatticeError> {
    let per_replica = par::map(
        cfg.replicas,
        |i| -> Result<Vec<AbsContSample>, LatticeError> {
            let seed = replica_seed(cfg.seed, i as u64);
            let env = LatticeEnvironment::new(cfg.dimension, seed, tau.clone(), cfg.box_factor)?;
            let rec = env.passage_time_to_direction(cfg.n, &cfg.xi)?;
            if rec.length < cfg.min_length {
                return Ok(Vec::new());
            }
            let len = rec.length as f64;
            Ok((0..cfg.intervals_per_geodesic)
                .map(|j| {
                    let lambda = cfg.interval_lengths[j % cfg.interval_lengths.len()];
                    let start =
                        unit_from_bits(hash_words(cfg.seed, PROBE_DOMAIN, &[i as u64, j as u64]))
                            * (1.0 - lambda);
                    let inside = rec
                        .uniforms
                        .iter()
                        .filter(|&&u| start <= u && u < start + lambda)
                        .count();
                    AbsContSample {
                        replica: i,
                        geodesic_length: rec.length,
                        interval_start: start,
                        interval_length: lambda,
                        mass: inside as f64 / len,
                        bound: abs_cont_bound(cfg.dimension, lambda),
                    }
                })
                .collect())
        },
    );
    let mut samples = Vec::new();
    let mut short_geodesics = 0;
    for r in per_replica {
        let r = r?;
        if r.is_empty() && cfg.intervals_per_geodesic > 0 {
            short_geodesics += 1;
        }
        samples.extend(r);
    }
    let satisfied = samples.iter().filter(|s| s.mass <= s.bound).count();
    let pairs = samples.len();
    Ok(AbsContReport {
        fraction: if pairs == 0 {
            0.0
        } else {
            satisfied as f64 / pairs as f64
        },
        samples,
        pairs,
        satisfied,
        short_geodesics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> LatticePoint {
        LatticePoint(c.to_vec())
    }

    #[test]
    fn constant_weights_give_l1_distance() {
        let env = LatticeEnvironment::new(2, 1, WeightFunction::constant(1.0), 2.0).unwrap();
        let r = env.passage_time(&p(&[0, 0]), &p(&[3, -2])).unwrap();
        assert_eq!(r.passage_time, 5.0);
        assert_eq!(r.length, 5);
        let r = env.passage_time_to_direction(10.0, &[1.0, 0.0]).unwrap();
        assert_eq!(r.passage_time, 10.0);
    }

    #[test]
    fn empty_path_for_equal_points() {
        let env = LatticeEnvironment::new(2, 1, WeightFunction::identity(), 2.0).unwrap();
        let r = env.passage_time(&p(&[1, 1]), &p(&[1, 1])).unwrap();
        assert_eq!(r.passage_time, 0.0);
        assert!(r.edges.is_empty());
        assert_eq!(r.vertices, vec![p(&[1, 1])]);
    }

    #[test]
    fn direction_target_floors() {
        assert_eq!(LatticePoint::floor_of(&[1.0, 0.0], 10.5), p(&[10, 0]));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(LatticePoint::floor_of(&[s, -s], 3.0), p(&[2, -3]));
    }

    #[test]
    fn indexed_hash_matches_key_hash() {
        let env = LatticeEnvironment::new(3, 11, WeightFunction::identity(), 2.0).unwrap();
        let grid = Grid::new(3, &BoxSpec::fixed(2).unwrap(), u64::MAX).unwrap();
        for idx in [0, 17, 60, 124] {
            for axis in 0..3 {
                let key = EdgeKey {
                    base: grid.point(idx),
                    axis,
                };
                assert_eq!(env.uniform_at(&grid, idx, axis), env.edge_uniform(&key));
            }
        }
    }

    #[test]
    fn edge_queries_are_checked_and_deterministic() {
        let env = LatticeEnvironment::new(2, 5, WeightFunction::identity(), 2.0).unwrap();
        let bx = BoxSpec::fixed(3).unwrap();
        let e = EdgeKey::between(&p(&[1, 0]), &p(&[0, 0])).unwrap();
        assert_eq!(e.base, p(&[0, 0]));
        let a = env.edge_weight(&e, &bx).unwrap();
        assert_eq!(a.to_bits(), env.edge_weight(&e, &bx).unwrap().to_bits());
        let outside = EdgeKey {
            base: p(&[3, 0]),
            axis: 0,
        };
        assert!(matches!(
            env.edge_weight(&outside, &bx),
            Err(LatticeError::OutOfBox(..))
        ));
    }

    #[test]
    fn rejects_negative_weights() {
        let tau = WeightFunction::identity().shift(-0.1, crate::weights::ShiftMode::AddEverywhere);
        assert!(matches!(
            LatticeEnvironment::new(2, 0, tau, 2.0),
            Err(LatticeError::NegativeWeight(_))
        ));
    }

    #[test]
    fn unit_square_extremes() {
        let env = LatticeEnvironment::new(2, 0, WeightFunction::constant(1.0), 2.0).unwrap();
        let bx = BoxSpec::fixed(1).unwrap();
        let ex = env
            .geodesic_length_extremes(&bx, &p(&[0, 0]), &p(&[1, 1]))
            .unwrap();
        assert_eq!((ex.n_min, ex.n_max), (2, 2));
        assert!(ex.n_max_exact);
        assert_eq!(ex.geodesic_count, Some(2.0));
    }

    #[test]
    fn geodesic_invariants_hold() {
        let env = LatticeEnvironment::new(2, 3, WeightFunction::identity(), 2.0).unwrap();
        let r = env.passage_time_to_direction(20.0, &[0.6, 0.8]).unwrap();
        r.check_invariants(env.tau()).unwrap();
    }
}
