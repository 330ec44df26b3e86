//! First-passage percolation on the rooted `d`-ary tree.
//!
//! Every non-root vertex `x` carries a weight `τ(U_x)`; the passage time to a
//! vertex is the sum over its ancestors `0 < y ≤ x`, and `T_n` is the minimum
//! over the `d^n` vertices at depth `n`. [`TreeEnvironment::tree_minimum`]
//! finds it exactly by depth-first branch and bound.

pub mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{DiscreteMeasure, MeasureError};
use crate::par;
use crate::rng::{absorb, hash_words, mix64, replica_seed, unit_from_bits, TREE_DOMAIN};
use crate::stats::Summary;
use crate::weights::{WeightError, WeightFunction};

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000_000;
pub const DEFAULT_MAX_DEPTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("arity must be at least 2, got {0}")]
    BadArity(usize),
    #[error("depth {n} exceeds the environment's max depth {max}")]
    TooDeep { n: usize, max: usize },
    #[error("search exceeded the node budget of {0}")]
    BudgetExceeded(u64),
    #[error("no finite lower bound for the weights (essential infimum {0})")]
    NoLowerBound(f64),
    #[error("need at least 2 replicas, got {0}")]
    TooFewReplicas(usize),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A lazily realized i.i.d. vertex environment on the `d`-ary tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnvironment {
    arity: usize,
    seed: u64,
    tau: WeightFunction,
    max_depth: usize,
    node_budget: u64,
}

/// The lexicographically smallest minimizing leaf at depth `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeGeodesicRecord {
    pub seed: u64,
    pub arity: usize,
    /// Child indices from the root.
    pub label: Vec<u32>,
    pub t_n: f64,
    /// `τ_y` for the ancestors `y` of the leaf, root excluded, top down.
    pub weights: Vec<f64>,
    /// `U_y` for the same vertices.
    pub uniforms: Vec<f64>,
    pub nodes_explored: u64,
}

impl TreeGeodesicRecord {
    pub fn depth(&self) -> usize {
        self.label.len()
    }

    /// `(σ̂, ν̂)`: the uniform probability measures on the ancestral `U`'s and `τ`'s.
    pub fn empirical_measures(&self) -> Result<(DiscreteMeasure, DiscreteMeasure), MeasureError> {
        Ok((
            DiscreteMeasure::empirical(&self.uniforms)?,
            DiscreteMeasure::empirical(&self.weights)?,
        ))
    }
}

impl TreeEnvironment {
    pub fn new(arity: usize, seed: u64, tau: WeightFunction) -> Result<Self, TreeError> {
        if arity < 2 {
            return Err(TreeError::BadArity(arity));
        }
        tau.validate()?;
        Ok(Self {
            arity,
            seed,
            tau,
            max_depth: DEFAULT_MAX_DEPTH,
            node_budget: DEFAULT_NODE_BUDGET,
        })
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn with_node_budget(mut self, node_budget: u64) -> Self {
        self.node_budget = node_budget;
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tau(&self) -> &WeightFunction {
        &self.tau
    }

    /// `U_x` for the vertex with child-index path `label`.
    pub fn vertex_uniform(&self, label: &[u32]) -> f64 {
        let words: Vec<u64> = label.iter().map(|&k| k as u64).collect();
        unit_from_bits(hash_words(self.seed, TREE_DOMAIN, &words))
    }

    /// `τ(U_x)`.
    pub fn vertex_weight(&self, label: &[u32]) -> f64 {
        self.tau.eval(self.vertex_uniform(label))
    }

    fn root_state(&self) -> u64 {
        mix64(self.seed ^ TREE_DOMAIN)
    }

    /// Exact `T_n` and its lexicographically smallest minimizing leaf.
    ///
    /// Passage times are left-to-right float sums along the path, the same
    /// sums an enumeration would compute, so the result is bit-exact.
    pub fn tree_minimum(&self, n: usize) -> Result<TreeGeodesicRecord, TreeError> {
        if n > self.max_depth {
            return Err(TreeError::TooDeep {
                n,
                max: self.max_depth,
            });
        }
        let summary = self.tau.summarize(1024);
        let b = summary.essential_infimum;
        if !b.is_finite() {
            return Err(TreeError::NoLowerBound(b));
        }
        // Atoms come back from `eval` bit-for-bit; continuous pieces get a
        // small cushion against rounding in the infimum itself.
        let floor = if summary.atom_at_infimum_mass > 0.0 {
            b
        } else {
            b - 1e-12 * (b.abs() + 1.0)
        };

        let mut search = Search {
            tau: &self.tau,
            arity: self.arity as u32,
            n,
            floor,
            budget: self.node_budget,
            nodes: 0,
            label: Vec::with_capacity(n),
            best: f64::INFINITY,
            best_label: Vec::new(),
        };
        search.greedy(self.root_state())?;
        search.dfs(self.root_state(), 0.0)?;

        let label = search.best_label;
        let mut state = self.root_state();
        let mut uniforms = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut t_n = 0.0;
        for &k in &label {
            state = absorb(state, k as u64);
            let u = unit_from_bits(state);
            let w = self.tau.eval(u);
            t_n += w;
            uniforms.push(u);
            weights.push(w);
        }
        debug_assert_eq!(t_n.to_bits(), search.best.to_bits());
        Ok(TreeGeodesicRecord {
            seed: self.seed,
            arity: self.arity,
            label,
            t_n,
            weights,
            uniforms,
            nodes_explored: search.nodes,
        })
    }
}

struct Search<'a> {
    tau: &'a WeightFunction,
    arity: u32,
    n: usize,
    floor: f64,
    budget: u64,
    nodes: u64,
    label: Vec<u32>,
    best: f64,
    best_label: Vec<u32>,
}

impl Search<'_> {
    fn visit(&mut self) -> Result<(), TreeError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            Err(TreeError::BudgetExceeded(self.budget))
        } else {
            Ok(())
        }
    }

    /// Cheapest-child descent, giving the first incumbent.
    fn greedy(&mut self, mut state: u64) -> Result<(), TreeError> {
        let mut total = 0.0;
        let mut label = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let mut pick = (f64::INFINITY, 0u32, 0u64);
            for k in 0..self.arity {
                self.visit()?;
                let s = absorb(state, k as u64);
                let w = self.tau.eval(unit_from_bits(s));
                if w < pick.0 {
                    pick = (w, k, s);
                }
            }
            total += pick.0;
            label.push(pick.1);
            state = pick.2;
        }
        self.best = total;
        self.best_label = label;
        Ok(())
    }

    /// Smallest value any completion of a prefix with sum `partial` can reach,
    /// folding `floor` the same way the true sum would be folded.
    fn bound(&self, partial: f64, remaining: usize) -> f64 {
        (0..remaining).fold(partial, |acc, _| acc + self.floor)
    }

    fn dfs(&mut self, state: u64, partial: f64) -> Result<(), TreeError> {
        let depth = self.label.len();
        if depth == self.n {
            if partial < self.best || (partial == self.best && self.label < self.best_label) {
                self.best = partial;
                self.best_label.clone_from(&self.label);
            }
            return Ok(());
        }
        for k in 0..self.arity {
            self.visit()?;
            let s = absorb(state, k as u64);
            let p = partial + self.tau.eval(unit_from_bits(s));
            self.label.push(k);
            let bound = self.bound(p, self.n - depth - 1);
            let prune = bound > self.best
                || (bound == self.best && self.label[..] > self.best_label[..=depth]);
            if !prune {
                self.dfs(s, p)?;
            }
            self.label.pop();
        }
        Ok(())
    }
}

/// Monte Carlo statistics of `T_n / n` over independent seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeMonteCarlo {
    pub n: usize,
    pub replicas: usize,
    pub summary: Summary,
    /// `T_n / n` per successful replica, in replica order.
    pub values: Vec<f64>,
    /// Replicas that hit the node budget.
    pub budget_failures: usize,
    pub total_nodes: u64,
}

/// Runs `tree_minimum` on replicas `0..replicas` with seeds
/// `replica_seed(seed, i)`, in parallel when enabled.
pub fn tree_min_monte_carlo(
    arity: usize,
    tau: &WeightFunction,
    n: usize,
    replicas: usize,
    seed: u64,
    node_budget: u64,
) -> Result<TreeMonteCarlo, TreeError> {
    if replicas < 2 {
        return Err(TreeError::TooFewReplicas(replicas));
    }
    if n == 0 {
        return Err(TreeError::TooDeep { n, max: 0 });
    }
    let base = TreeEnvironment::new(arity, seed, tau.clone())?
        .with_node_budget(node_budget)
        .with_max_depth(n.max(DEFAULT_MAX_DEPTH));
    let outcomes = par::map(replicas, |i| {
        let mut env = base.clone();
        env.seed = replica_seed(seed, i as u64);
        env.tree_minimum(n)
    });
    let mut values = Vec::with_capacity(replicas);
    let mut budget_failures = 0;
    let mut total_nodes = 0;
    for outcome in outcomes {
        match outcome {
            Ok(record) => {
                total_nodes += record.nodes_explored;
                values.push(record.t_n / n as f64);
            }
            Err(TreeError::BudgetExceeded(_)) => budget_failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(TreeMonteCarlo {
        n,
        replicas,
        summary: Summary::of(&values),
        values,
        budget_failures,
        total_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weights_pick_all_zero_leaf() {
        let env = TreeEnvironment::new(3, 9, WeightFunction::constant(0.5)).unwrap();
        let r = env.tree_minimum(10).unwrap();
        assert_eq!(r.t_n, 5.0);
        assert_eq!(r.label, vec![0; 10]);
        // Exploration stays linear in n once the bound is tight.
        assert!(r.nodes_explored < 200, "{}", r.nodes_explored);
    }

    #[test]
    fn incremental_hash_matches_label_hash() {
        let env = TreeEnvironment::new(2, 5, WeightFunction::identity()).unwrap();
        let r = env.tree_minimum(8).unwrap();
        for depth in 1..=8 {
            assert_eq!(r.uniforms[depth - 1], env.vertex_uniform(&r.label[..depth]));
        }
    }

    #[test]
    fn depth_zero_is_empty() {
        let env = TreeEnvironment::new(2, 1, WeightFunction::identity()).unwrap();
        let r = env.tree_minimum(0).unwrap();
        assert_eq!(r.t_n, 0.0);
        assert!(r.label.is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let env = TreeEnvironment::new(2, 1, WeightFunction::identity())
            .unwrap()
            .with_node_budget(10);
        assert_eq!(env.tree_minimum(12), Err(TreeError::BudgetExceeded(10)));
    }

    #[test]
    fn single_level_measures() {
        let env = TreeEnvironment::new(2, 3, WeightFunction::identity()).unwrap();
        let r = env.tree_minimum(1).unwrap();
        let (sigma, nu) = r.empirical_measures().unwrap();
        assert_eq!(nu, DiscreteMeasure::dirac(r.t_n));
        assert_eq!(sigma, DiscreteMeasure::dirac(r.uniforms[0]));
    }

    #[test]
    fn degenerate_monte_carlo() {
        let mc =
            tree_min_monte_carlo(2, &WeightFunction::constant(1.0), 8, 10, 0, 1_000_000).unwrap();
        assert_eq!((mc.summary.ci_lo, mc.summary.ci_hi), (1.0, 1.0));
    }
}
