//! The tree time constant and its entropy-constrained minimizer.
//!
//! For `d`-ary tree FPP with i.i.d. vertex weights `τ(U)`,
//!
//! ```text
//! μ = −inf_{α>0} g(α),   g(α) = (log d + log ∫₀¹ e^{−ατ(u)} du) / α.
//! ```
//!
//! Writing `σ_α` for the tilted density `e^{−ατ}/Z(α)`, one has
//! `g'(α) = (KL(σ_α) − log d)/α²` and `KL(σ_α)` is nondecreasing in `α`, so
//! the minimizer `α⋆` is the root of `KL(σ_α) = log d` and there
//! `μ = ⟨τ, σ_{α⋆}⟩`. When no root exists (the law has an atom of mass at
//! least `1/d` at its infimum `𝔟`), `g` decreases all the way to the right
//! end of the bracket and `μ = 𝔟`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeEnvironment, LatticeError, LatticePoint};
use crate::measures::{DiscreteMeasure, GriddedDensity, MeasureError, Quadrature, DEFAULT_GRID};
use crate::par;
use crate::rng::replica_seed;
use crate::stats::Summary;
use crate::weights::WeightFunction;

pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 1e4;
const COARSE_NODES: usize = 200;
/// Residual above which a minimizer is rejected.
pub const RESIDUAL_LIMIT: f64 = 1e-5;
/// Finite-difference step for derivative checks.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationalError {
    #[error("arity must be at least 2, got {0}")]
    BadArity(usize),
    #[error("non-finite quadrature value at α = {alpha}")]
    NonFinite { alpha: f64 },
    #[error(
        "minimizer residuals too large (KL {kl:.3e}, mean {mean:.3e}); refine the quadrature grid beyond {cells} cells"
    )]
    Residual { kl: f64, mean: f64, cells: usize },
    #[error(
        "α⋆ reaches the bracket end {ALPHA_MAX} but the atom at the infimum has mass {mass} < 1/d"
    )]
    UnresolvedBoundary { mass: f64 },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// `τ` sampled on a quadrature grid, ready for repeated tilting.
#[derive(Clone, Debug)]
pub struct TiltedFamily {
    quadrature: Quadrature,
    tau_values: Vec<f64>,
    log_weights: Vec<f64>,
    log_arity: f64,
}

impl TiltedFamily {
    pub fn new(
        tau: &WeightFunction,
        arity: usize,
        quadrature: Quadrature,
    ) -> Result<Self, VariationalError> {
        if arity < 2 {
            return Err(VariationalError::BadArity(arity));
        }
        let tau_values: Vec<f64> = quadrature.nodes.iter().map(|&u| tau.eval(u)).collect();
        if tau_values.iter().any(|t| !t.is_finite()) {
            return Err(VariationalError::NonFinite { alpha: 0.0 });
        }
        let log_weights = quadrature.weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            quadrature,
            tau_values,
            log_weights,
            log_arity: (arity as f64).ln(),
        })
    }

    /// Grid adapted to the jumps of `τ`, with `cells` base cells.
    pub fn for_weight(
        tau: &WeightFunction,
        arity: usize,
        cells: usize,
    ) -> Result<Self, VariationalError> {
        Self::new(tau, arity, adapted_quadrature(tau, cells))
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    /// `log Z(α) = log ∫ e^{−ατ}` via log-sum-exp.
    pub fn log_normalizer(&self, alpha: f64) -> Result<f64, VariationalError> {
        let max = self
            .tau_values
            .iter()
            .zip(&self.log_weights)
            .map(|(t, lw)| lw - alpha * t)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .tau_values
            .iter()
            .zip(&self.log_weights)
            .map(|(t, lw)| (lw - alpha * t - max).exp())
            .sum();
        let value = max + sum.ln();
        if value.is_finite() {
            Ok(value)
        } else {
            Err(VariationalError::NonFinite { alpha })
        }
    }

    pub fn g(&self, alpha: f64) -> Result<f64, VariationalError> {
        Ok((self.log_arity + self.log_normalizer(alpha)?) / alpha)
    }

    /// Tilted probabilities `w_i e^{−ατ_i} / Z` on the grid cells.
    fn tilted_masses(&self, alpha: f64) -> Result<Vec<f64>, VariationalError> {
        let log_z = self.log_normalizer(alpha)?;
        Ok(self
            .tau_values
            .iter()
            .zip(&self.log_weights)
            .map(|(t, lw)| (lw - alpha * t - log_z).exp())
            .collect())
    }

    /// `KL(σ_α ‖ Λ) − log d`, nondecreasing in `α`.
    pub fn entropy_gap(&self, alpha: f64) -> Result<f64, VariationalError> {
        let log_z = self.log_normalizer(alpha)?;
        let masses = self.tilted_masses(alpha)?;
        let mean: f64 = masses
            .iter()
            .zip(&self.tau_values)
            .map(|(p, t)| p * t)
            .sum();
        Ok(-alpha * mean - log_z - self.log_arity)
    }
}

/// Result of the one-dimensional minimization over the tilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConstant {
    pub mu: f64,
    pub alpha_star: f64,
    /// The minimum sits at the right end of the bracket: atom case, `μ = 𝔟`.
    pub boundary: bool,
    pub log_normalizer: f64,
    /// `min g` over the bracket (so `μ = −g_min` away from the boundary).
    pub g_min: f64,
    pub essential_infimum: f64,
}

/// Coarse scan nodes `α_k`, log-spaced over `[ALPHA_MIN, ALPHA_MAX]`.
/// Midpoint grid split at the jumps of `τ` and graded polynomially toward
/// the endpoints where `τ′` is unbounded.
pub fn adapted_quadrature(tau: &WeightFunction, cells: usize) -> Quadrature {
    const GRADED_CELLS: f64 = 64.0;
    const GRADED_POINTS: i32 = 512;
    let mut points = tau.breakpoints();
    let reach = (GRADED_CELLS / cells.max(1) as f64).min(0.5);
    for end in tau.singular_endpoints() {
        points.extend((1..GRADED_POINTS).map(|j| {
            let offset = reach * (j as f64 / GRADED_POINTS as f64).powi(4);
            if end == 0.0 {
                offset
            } else {
                1.0 - offset
            }
        }));
    }
    Quadrature::adapted(cells, &points)
}

pub fn coarse_alphas() -> Vec<f64> {
    let (a, b) = (ALPHA_MIN.ln(), ALPHA_MAX.ln());
    (0..COARSE_NODES)
        .map(|k| (a + (b - a) * k as f64 / (COARSE_NODES - 1) as f64).exp())
        .collect()
}

/// Tree time constant of `τ` for arity `d`.
///
/// The minimum of `g` is located by a log-grid scan and golden-section
/// refinement, then polished by bisection on `KL(σ_α) = log d` inside the
/// bracket.
pub fn tree_time_constant(
    family: &TiltedFamily,
    tau: &WeightFunction,
) -> Result<TimeConstant, VariationalError> {
    let summary = tau.summarize(1024);
    let alphas = coarse_alphas();
    let values = alphas
        .iter()
        .map(|&a| family.g(a))
        .collect::<Result<Vec<_>, _>>()?;
    let k = values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .expect("nonempty scan");

    if k == alphas.len() - 1 && family.entropy_gap(ALPHA_MAX)? < 0.0 {
        return Ok(TimeConstant {
            mu: summary.essential_infimum,
            alpha_star: ALPHA_MAX,
            boundary: true,
            log_normalizer: family.log_normalizer(ALPHA_MAX)?,
            g_min: values[k],
            essential_infimum: summary.essential_infimum,
        });
    }

    let lo = alphas[k.saturating_sub(1)];
    let hi = alphas[(k + 1).min(alphas.len() - 1)];
    let golden = golden_section(|x| family.g(x.exp()), lo.ln(), hi.ln(), 1e-10)?.exp();
    let alpha_star = polish_root(family, golden)?;
    let g_min = family.g(alpha_star)?;
    Ok(TimeConstant {
        mu: -g_min,
        alpha_star,
        boundary: false,
        log_normalizer: family.log_normalizer(alpha_star)?,
        g_min,
        essential_infimum: summary.essential_infimum,
    })
}

/// Convenience wrapper building the default grid.
pub fn time_constant_of(
    tau: &WeightFunction,
    arity: usize,
) -> Result<TimeConstant, VariationalError> {
    let family = TiltedFamily::for_weight(tau, arity, DEFAULT_GRID)?;
    tree_time_constant(&family, tau)
}

fn golden_section(
    f: impl Fn(f64) -> Result<f64, VariationalError>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64, VariationalError> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection in `log α` on the entropy gap, starting from a bracket around `start`.
fn polish_root(family: &TiltedFamily, start: f64) -> Result<f64, VariationalError> {
    let gap = |a: f64| family.entropy_gap(a);
    let (mut lo, mut hi) = (start, start);
    while gap(lo)? > 0.0 && lo > ALPHA_MIN {
        lo = (lo / 2.0).max(ALPHA_MIN);
    }
    while gap(hi)? < 0.0 && hi < ALPHA_MAX {
        hi = (hi * 2.0).min(ALPHA_MAX);
    }
    if gap(lo)? > 0.0 || gap(hi)? < 0.0 {
        return Ok(start);
    }
    for _ in 0..200 {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever end has the smaller |gap|.
    Ok(if gap(lo)?.abs() <= gap(hi)?.abs() {
        lo
    } else {
        hi
    })
}

/// The unique minimizer of `⟨τ,σ⟩` over `{KL(σ‖Λ) ≤ log d}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedMinimizer {
    pub arity: usize,
    pub alpha_star: f64,
    pub log_normalizer: f64,
    pub mu: f64,
    pub density: GriddedDensity,
    pub kl_value: f64,
    pub atom_case: bool,
    pub essential_infimum: f64,
    /// `|KL − log d|`; zero by definition in the atom case.
    pub kl_residual: f64,
    /// `|⟨τ, σ⋆⟩ − μ|`.
    pub mean_residual: f64,
}

impl TiltedMinimizer {
    /// `τ⋆σ⋆` discretized on the grid; `δ_𝔟` in the atom case.
    pub fn pushforward(&self, tau: &WeightFunction) -> Result<DiscreteMeasure, VariationalError> {
        if self.atom_case {
            return Ok(DiscreteMeasure::dirac(self.essential_infimum));
        }
        Ok(self.density.pushforward(tau)?)
    }

    /// `⟨ψ, σ⋆⟩`.
    pub fn inner_product(&self, psi: &WeightFunction) -> f64 {
        self.density.integrate(|u| psi.eval(u))
    }
}

/// Solves for the tilted minimizer and validates its two defining properties.
pub fn solve_minimizer(
    tau: &WeightFunction,
    arity: usize,
    cells: usize,
) -> Result<TiltedMinimizer, VariationalError> {
    let family = TiltedFamily::for_weight(tau, arity, cells)?;
    let tc = tree_time_constant(&family, tau)?;
    let q = family.quadrature();
    let log_d = (arity as f64).ln();

    if tc.boundary {
        let b = tc.essential_infimum;
        let summary = tau.summarize(1024);
        if summary.atom_at_infimum_mass < 1.0 / arity as f64 - 1e-12 {
            return Err(VariationalError::UnresolvedBoundary {
                mass: summary.atom_at_infimum_mass,
            });
        }
        let raw: Vec<f64> = family
            .tau_values
            .iter()
            .map(|&t| if t == b { 1.0 } else { 0.0 })
            .collect();
        let density = GriddedDensity::from_unnormalized(q, raw)?;
        let kl_value = density.kl_divergence();
        let mean = density.integrate(|u| tau.eval(u));
        return Ok(TiltedMinimizer {
            arity,
            alpha_star: tc.alpha_star,
            log_normalizer: tc.log_normalizer,
            mu: b,
            density,
            kl_value,
            atom_case: true,
            essential_infimum: b,
            kl_residual: 0.0,
            mean_residual: (mean - b).abs(),
        });
    }

    let raw = family.tilted_masses(tc.alpha_star)?;
    let density_values: Vec<f64> = raw.iter().zip(&q.weights).map(|(m, w)| m / w).collect();
    let density = GriddedDensity::from_unnormalized(q, density_values)?;
    let kl_value = density.kl_divergence();
    let mean = density.integrate(|u| tau.eval(u));
    let kl_residual = (kl_value - log_d).abs();
    let mean_residual = (mean - tc.mu).abs();
    if kl_residual > RESIDUAL_LIMIT || mean_residual > RESIDUAL_LIMIT {
        return Err(VariationalError::Residual {
            kl: kl_residual,
            mean: mean_residual,
            cells,
        });
    }
    Ok(TiltedMinimizer {
        arity,
        alpha_star: tc.alpha_star,
        log_normalizer: tc.log_normalizer,
        mu: tc.mu,
        density,
        kl_value,
        atom_case: false,
        essential_infimum: tc.essential_infimum,
        kl_residual,
        mean_residual,
    })
}

/// One row of a derivative table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeRow {
    pub h: f64,
    pub f: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Finite-difference slope (central on the tree, forward secant on the lattice).
    pub f_fd: f64,
    /// `⟨ψ, σ⋆(h)⟩` on the tree; mean `L_ψ(γ)/n` on the lattice.
    pub inner_product: f64,
}

/// Paired comparison of a lattice secant slope with the geodesic statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub h_lo: f64,
    pub h_hi: f64,
    pub slope: Summary,
    pub statistic: Summary,
    /// Per-replica `slope − statistic`; agreement means its CI covers 0.
    pub difference: Summary,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub rows: Vec<DerivativeRow>,
    pub midpoint_pairs: usize,
    pub midpoint_violations: usize,
    /// `max ((f(h₁)+f(h₂))/2 − f((h₁+h₂)/2))`; positive means a violation.
    pub max_midpoint_excess: f64,
    pub max_derivative_discrepancy: f64,
    /// Grid points dropped because the minimizer sits in the atom case.
    pub excluded_h: Vec<f64>,
    pub monotonicity_violations: Option<usize>,
    pub sandwich_violations: Option<usize>,
    pub slope_checks: Vec<SlopeCheck>,
}

/// Tolerance for exact midpoint concavity on the tree.
pub const MIDPOINT_TOLERANCE: f64 = 1e-9;

/// Compares `f'(h)` for `f(h) = μ(τ + hψ)` by central differences against
/// `⟨ψ, σ⋆(h)⟩`, and checks midpoint concavity on every grid pair.
pub fn tree_derivative_identity(
    tau: &WeightFunction,
    psi: &WeightFunction,
    arity: usize,
    h_grid: &[f64],
    cells: usize,
) -> Result<ConcavityReport, VariationalError> {
    let f = |h: f64| -> Result<f64, VariationalError> {
        let t = tau.clone().perturb(psi.clone(), h);
        let family = TiltedFamily::for_weight(&t, arity, cells)?;
        Ok(tree_time_constant(&family, &t)?.mu)
    };
    let mut rows = Vec::new();
    let mut excluded_h = Vec::new();
    let mut values = Vec::with_capacity(h_grid.len());
    let mut max_derivative_discrepancy: f64 = 0.0;
    for &h in h_grid {
        let t = tau.clone().perturb(psi.clone(), h);
        let m = solve_minimizer(&t, arity, cells)?;
        values.push(m.mu);
        if m.atom_case {
            excluded_h.push(h);
            continue;
        }
        let f_fd = (f(h + FD_STEP)? - f(h - FD_STEP)?) / (2.0 * FD_STEP);
        let inner_product = m.inner_product(psi);
        max_derivative_discrepancy = max_derivative_discrepancy.max((f_fd - inner_product).abs());
        rows.push(DerivativeRow {
            h,
            f: m.mu,
            ci_lo: m.mu,
            ci_hi: m.mu,
            f_fd,
            inner_product,
        });
    }

    let mut midpoint_pairs = 0;
    let mut midpoint_violations = 0;
    let mut max_midpoint_excess = f64::NEG_INFINITY;
    for i in 0..h_grid.len() {
        for j in i + 1..h_grid.len() {
            let mid = f(0.5 * (h_grid[i] + h_grid[j]))?;
            let excess = 0.5 * (values[i] + values[j]) - mid;
            midpoint_pairs += 1;
            if excess > MIDPOINT_TOLERANCE {
                midpoint_violations += 1;
            }
            max_midpoint_excess = max_midpoint_excess.max(excess);
        }
    }
    Ok(ConcavityReport {
        rows,
        midpoint_pairs,
        midpoint_violations,
        max_midpoint_excess,
        max_derivative_discrepancy,
        excluded_h,
        monotonicity_violations: None,
        sandwich_violations: None,
        slope_checks: Vec::new(),
    })
}

/// Settings for [`lattice_concavity_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeProbe {
    pub dimension: usize,
    pub xi: Vec<f64>,
    pub n: f64,
    pub replicas: usize,
    pub seed: u64,
    pub box_factor: f64,
}

/// Per-replica, per-`h` outcome on the coupled environments.
#[derive(Clone, Copy, Debug)]
struct ProbeSample {
    passage_time: f64,
    /// `L_ψ(γ) = ∑_{e∈γ} ψ(U_e)`.
    statistic: f64,
}

/// Monte Carlo `f(h) = μ̂(τ + hψ)` on a shared coupling: replica `i` uses the
/// same uniforms at every `h`.
///
/// Reports sample-wise monotonicity in `h` (meaningful when `ψ ≥ 0`), the
/// pathwise sandwich `Δh·L_ψ(γ_{h₂}) ≤ T(h₂) − T(h₁) ≤ Δh·L_ψ(γ_{h₁})`,
/// midpoint concavity up to CI overlap, and paired CIs for the secant slope
/// against `L_ψ/n`.
pub fn lattice_concavity_probe(
    tau: &WeightFunction,
    psi: &WeightFunction,
    h_grid: &[f64],
    probe: &LatticeProbe,
) -> Result<ConcavityReport, VariationalError> {
    let n = probe.n;
    let run = |i: usize| -> Result<Vec<ProbeSample>, VariationalError> {
        let seed = replica_seed(probe.seed, i as u64);
        h_grid
            .iter()
            .map(|&h| {
                let t = tau.clone().perturb(psi.clone(), h);
                let env = LatticeEnvironment::new(probe.dimension, seed, t, probe.box_factor)?;
                let target = LatticePoint::floor_of(&probe.xi, n);
                let rec = env.passage_time(&LatticePoint::origin(probe.dimension), &target)?;
                let statistic = rec.uniforms.iter().map(|&u| psi.eval(u)).sum();
                Ok(ProbeSample {
                    passage_time: rec.passage_time,
                    statistic,
                })
            })
            .collect()
    };
    let samples = par::map(probe.replicas, run)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let psi_nonneg = psi.summarize(1024).essential_infimum >= 0.0;
    let mut monotonicity_violations = 0;
    let mut sandwich_violations = 0;
    for replica in &samples {
        for j in 0..h_grid.len().saturating_sub(1) {
            let (a, b) = (replica[j], replica[j + 1]);
            let dh = h_grid[j + 1] - h_grid[j];
            if psi_nonneg && b.passage_time < a.passage_time {
                monotonicity_violations += 1;
            }
            let diff = b.passage_time - a.passage_time;
            let slack = 1e-9 * (a.passage_time.abs() + b.passage_time.abs() + 1.0);
            if diff > dh * a.statistic + slack || diff < dh * b.statistic - slack {
                sandwich_violations += 1;
            }
        }
    }

    let column = |j: usize, pick: fn(&ProbeSample) -> f64| -> Vec<f64> {
        samples.iter().map(|r| pick(&r[j]) / n).collect()
    };
    let summaries: Vec<Summary> = (0..h_grid.len())
        .map(|j| Summary::of(&column(j, |s| s.passage_time)))
        .collect();

    let mut rows = Vec::new();
    let mut slope_checks = Vec::new();
    for (j, &h) in h_grid.iter().enumerate() {
        let stat = Summary::of(&column(j, |s| s.statistic));
        let f_fd = if j + 1 < h_grid.len() {
            (summaries[j + 1].mean - summaries[j].mean) / (h_grid[j + 1] - h_grid[j])
        } else {
            f64::NAN
        };
        rows.push(DerivativeRow {
            h,
            f: summaries[j].mean,
            ci_lo: summaries[j].ci_lo,
            ci_hi: summaries[j].ci_hi,
            f_fd,
            inner_product: stat.mean,
        });
        if j + 1 < h_grid.len() {
            let dh = h_grid[j + 1] - h_grid[j];
            let slopes: Vec<f64> = samples
                .iter()
                .map(|r| (r[j + 1].passage_time - r[j].passage_time) / (n * dh))
                .collect();
            let stats: Vec<f64> = samples
                .iter()
                .map(|r| 0.5 * (r[j].statistic + r[j + 1].statistic) / n)
                .collect();
            let diffs: Vec<f64> = slopes.iter().zip(&stats).map(|(s, t)| s - t).collect();
            let difference = Summary::of(&diffs);
            slope_checks.push(SlopeCheck {
                h_lo: h,
                h_hi: h_grid[j + 1],
                slope: Summary::of(&slopes),
                statistic: Summary::of(&stats),
                agrees: difference.contains(0.0),
                difference,
            });
        }
    }

    // Midpoint concavity on grid triples (h_i, h_j, h_k) with h_j the midpoint,
    // flagged only when the CIs fail to overlap.
    let mut midpoint_pairs = 0;
    let mut midpoint_violations = 0;
    let mut max_midpoint_excess = f64::NEG_INFINITY;
    for i in 0..h_grid.len() {
        for k in i + 2..h_grid.len() {
            let target = 0.5 * (h_grid[i] + h_grid[k]);
            if let Some(j) = h_grid.iter().position(|&h| (h - target).abs() < 1e-12) {
                midpoint_pairs += 1;
                let chord: Vec<f64> = samples
                    .iter()
                    .map(|r| 0.5 * (r[i].passage_time + r[k].passage_time) / n)
                    .collect();
                let chord = Summary::of(&chord);
                let excess = chord.mean - summaries[j].mean;
                max_midpoint_excess = max_midpoint_excess.max(excess);
                if chord.ci_lo > summaries[j].ci_hi {
                    midpoint_violations += 1;
                }
            }
        }
    }

    Ok(ConcavityReport {
        rows,
        midpoint_pairs,
        midpoint_violations,
        max_midpoint_excess,
        max_derivative_discrepancy: f64::NAN,
        excluded_h: Vec::new(),
        monotonicity_violations: Some(monotonicity_violations),
        sandwich_violations: Some(sandwich_violations),
        slope_checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weight_hits_boundary() {
        let tc = time_constant_of(&WeightFunction::constant(0.7), 2).unwrap();
        assert!(tc.boundary);
        assert_eq!(tc.mu, 0.7);
    }

    #[test]
    fn identity_weight_binary_tree() {
        let m = solve_minimizer(&WeightFunction::identity(), 2, DEFAULT_GRID).unwrap();
        assert!(!m.atom_case);
        assert!(m.kl_residual < 1e-10, "{}", m.kl_residual);
        assert!(m.mean_residual < 1e-10, "{}", m.mean_residual);
        assert!((m.mu - 0.184_827_520_9).abs() < 1e-6, "{}", m.mu);
        assert!(
            (m.alpha_star - 5.262_075_7).abs() < 1e-4,
            "{}",
            m.alpha_star
        );
    }

    #[test]
    fn zero_atom_above_threshold_gives_zero() {
        let tau = WeightFunction::two_atom(0.5, 0.0, 1.0).unwrap();
        let m = solve_minimizer(&tau, 2, DEFAULT_GRID).unwrap();
        assert!(m.atom_case);
        assert_eq!(m.mu, 0.0);
        assert_eq!(m.pushforward(&tau).unwrap(), DiscreteMeasure::dirac(0.0));
    }
}
