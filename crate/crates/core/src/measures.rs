//! Finite atomic measures on the real line and gridded densities on `[0,1]`.

pub mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weights::{WeightError, WeightFunction};

/// Relative tolerance on cached totals and probability normalization.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Default number of quadrature cells on `[0,1]`.
pub const DEFAULT_GRID: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("atom at {location} has non-positive or non-finite mass {mass}")]
    BadMass { location: f64, mass: f64 },
    #[error("atom location {0} is not finite")]
    BadLocation(f64),
    #[error("expected a probability measure, total mass is {0}")]
    NotProbability(f64),
    #[error("extended Wasserstein distance needs total mass ≥ 1, got {0}")]
    MassBelowOne(f64),
    #[error("density is not normalized: ∑ w·ρ = {0}")]
    NotNormalized(f64),
    #[error("density grid is malformed: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// A finite nonnegative atomic measure `∑ m_i δ_{x_i}`.
///
/// Atoms may repeat until [`DiscreteMeasure::canonicalize`] merges equal
/// locations (by exact float equality).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
    total_mass: f64,
}

impl Default for DiscreteMeasure {
    fn default() -> Self {
        Self::zero()
    }
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        for &(location, mass) in &atoms {
            if !location.is_finite() {
                return Err(MeasureError::BadLocation(location));
            }
            if !(mass.is_finite() && mass > 0.0) {
                return Err(MeasureError::BadMass { location, mass });
            }
        }
        let total_mass = atoms.iter().map(|a| a.1).sum();
        Ok(Self { atoms, total_mass })
    }

    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            total_mass: 0.0,
        }
    }

    pub fn dirac(location: f64) -> Self {
        Self::new(vec![(location, 1.0)]).expect("finite location")
    }

    /// `mass_each · ∑_i δ_{values[i]}`, keeping repeats.
    pub fn from_values(values: &[f64], mass_each: f64) -> Result<Self, MeasureError> {
        Self::new(values.iter().map(|&v| (v, mass_each)).collect())
    }

    /// The uniform probability measure on the multiset `values`; zero if empty.
    pub fn empirical(values: &[f64]) -> Result<Self, MeasureError> {
        if values.is_empty() {
            return Ok(Self::zero());
        }
        Self::from_values(values, 1.0 / values.len() as f64)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() <= MASS_TOLERANCE
    }

    /// Sorts atoms by location and merges exactly equal locations.
    pub fn canonicalize(&self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => merged.push((x, m)),
            }
        }
        Self {
            atoms: merged,
            total_mass: self.total_mass,
        }
    }

    /// `⟨f, m⟩ = ∑ m_i f(x_i)`, summed in atom order.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(x, m)| m * f(x)).sum()
    }

    /// `m / ⟨1, m⟩`; the zero measure stays zero.
    pub fn normalize(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let total = self.total_mass;
        Self::new(self.atoms.iter().map(|&(x, m)| (x, m / total)).collect())
            .expect("scaling keeps masses positive")
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, MeasureError> {
        Self::new(self.atoms.iter().map(|&(x, m)| (x, m * factor)).collect())
    }

    /// Mass of the atoms whose location satisfies `pred`.
    pub fn mass_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        self.atoms.iter().filter(|a| pred(a.0)).map(|a| a.1).sum()
    }

    /// Mass sitting exactly at `location`.
    pub fn mass_at(&self, location: f64) -> f64 {
        self.mass_where(|x| x == location)
    }

    /// `τ⋆m`: the atom `(u, w)` becomes `(τ(u), w)`, order preserved.
    pub fn pushforward(&self, tau: &WeightFunction) -> Result<Self, MeasureError> {
        let atoms = self
            .atoms
            .iter()
            .map(|&(u, w)| Ok((tau.evaluate(u)?, w)))
            .collect::<Result<Vec<_>, MeasureError>>()?;
        Self::new(atoms)
    }

    /// `τ⋆⁺m`: like [`pushforward`](Self::pushforward) but drops atoms with `τ(u) = 0`.
    pub fn pushforward_positive(&self, tau: &WeightFunction) -> Result<Self, MeasureError> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for &(u, w) in &self.atoms {
            let t = tau.evaluate(u)?;
            if t != 0.0 {
                atoms.push((t, w));
            }
        }
        Self::new(atoms)
    }

    fn require_probability(&self) -> Result<(), MeasureError> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(MeasureError::NotProbability(self.total_mass))
        }
    }

    /// Sorted locations with cumulative masses, the last forced to exactly 1.
    fn quantile_steps(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.canonicalize();
        let mut acc = 0.0;
        let mut locations = Vec::with_capacity(c.atoms.len());
        let mut cumulative = Vec::with_capacity(c.atoms.len());
        for (x, m) in c.atoms {
            acc += m;
            locations.push(x);
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        (locations, cumulative)
    }

    /// Serializable rows `(location, mass)` in atom order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied()
    }
}

/// Wasserstein-1 distance between probability measures, `∫₀¹ |G₁⁻¹ − G₂⁻¹| du`.
///
/// Quantiles use the right-continuous inverse `G⁻¹(u) = inf{t : G(t) ≥ u}`;
/// both are step functions, so the integral is an exact sum over the merged
/// breakpoints.
pub fn wasserstein(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    a.require_probability()?;
    b.require_probability()?;
    let (xa, ca) = a.quantile_steps();
    let (xb, cb) = b.quantile_steps();
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < xa.len() && j < xb.len() {
        let next = ca[i].min(cb[j]);
        total += (next - u) * (xa[i] - xb[j]).abs();
        u = next;
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    Ok(total)
}

/// `|⟨1, a − b⟩| + W(â, b̂)` for measures of mass at least one.
pub fn wasserstein_extended(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    for m in [a, b] {
        if m.total_mass < 1.0 - MASS_TOLERANCE {
            return Err(MeasureError::MassBelowOne(m.total_mass));
        }
    }
    let mass_term = (a.total_mass - b.total_mass).abs();
    Ok(mass_term + wasserstein(&a.normalize(), &b.normalize())?)
}

/// `½ ∑_x |a({x}) − b({x})|` for probability measures.
pub fn total_variation(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, MeasureError> {
    a.require_probability()?;
    b.require_probability()?;
    let ca = a.canonicalize();
    let cb = b.canonicalize();
    let (xa, xb) = (ca.atoms(), cb.atoms());
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < xa.len() || j < xb.len() {
        let take_a = j == xb.len() || (i < xa.len() && xa[i].0 < xb[j].0);
        let take_b = i == xa.len() || (j < xb.len() && xb[j].0 < xa[i].0);
        if take_a {
            sum += xa[i].1;
            i += 1;
        } else if take_b {
            sum += xb[j].1;
            j += 1;
        } else {
            sum += (xa[i].1 - xb[j].1).abs();
            i += 1;
            j += 1;
        }
    }
    Ok((0.5 * sum).min(1.0))
}

/// Upper bound on `2·TV` between the uniform measures on two finite sets
/// that share `k` points and carry `i` and `j` further points respectively.
pub fn shared_support_tv_bound(k: usize, i: usize, j: usize) -> f64 {
    let (k, i, j) = (k as f64, i as f64, j as f64);
    k * (1.0 / (i + k) - 1.0 / (j + k)).abs() + i / (i + k) + j / (j + k)
}

/// Quadrature nodes and weights on `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Midpoint rule on `n` equal cells.
    pub fn uniform(n: usize) -> Self {
        Self::adapted(n, &[])
    }

    /// Midpoint rule on `n` equal cells, additionally split at `breakpoints`
    /// so that no cell straddles a jump.
    pub fn adapted(n: usize, breakpoints: &[f64]) -> Self {
        let n = n.max(1);
        let mut edges: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        for &b in breakpoints {
            if b <= 0.0 || b >= 1.0 {
                continue;
            }
            let cell = ((b * n as f64).floor() as usize).min(n - 1);
            let near_edge = (b - edges[cell]).abs() < 1e-15 || (edges[cell + 1] - b).abs() < 1e-15;
            if !near_edge {
                edges.push(b);
            }
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let (nodes, weights) = edges
            .windows(2)
            .map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0]))
            .unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫₀¹ f du` by the midpoint rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }
}

/// A probability density `ρ` with respect to Lebesgue measure on `[0,1]`,
/// stored at quadrature nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GriddedDensity {
    grid: Vec<f64>,
    density_values: Vec<f64>,
    quadrature_weights: Vec<f64>,
}

impl GriddedDensity {
    pub fn new(
        grid: Vec<f64>,
        density_values: Vec<f64>,
        quadrature_weights: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        if grid.len() != density_values.len() || grid.len() != quadrature_weights.len() {
            return Err(MeasureError::BadGrid("length mismatch".into()));
        }
        if grid.is_empty() {
            return Err(MeasureError::BadGrid("empty grid".into()));
        }
        if quadrature_weights
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(MeasureError::BadGrid("weights must be positive".into()));
        }
        if density_values.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(MeasureError::BadGrid(
                "densities must be finite and ≥ 0".into(),
            ));
        }
        let total: f64 = density_values
            .iter()
            .zip(&quadrature_weights)
            .map(|(r, w)| r * w)
            .sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(MeasureError::NotNormalized(total));
        }
        Ok(Self {
            grid,
            density_values,
            quadrature_weights,
        })
    }

    /// Normalizes `f` on the quadrature grid into a density.
    pub fn from_fn(q: &Quadrature, f: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        let raw: Vec<f64> = q.nodes.iter().map(|&u| f(u)).collect();
        Self::from_unnormalized(q, raw)
    }

    pub fn from_unnormalized(q: &Quadrature, raw: Vec<f64>) -> Result<Self, MeasureError> {
        let z: f64 = raw.iter().zip(&q.weights).map(|(r, w)| r * w).sum();
        if !(z.is_finite() && z > 0.0) {
            return Err(MeasureError::NotNormalized(z));
        }
        let density = raw.into_iter().map(|r| r / z).collect();
        Self::new(q.nodes.clone(), density, q.weights.clone())
    }

    pub fn uniform(n: usize) -> Self {
        Self::from_fn(&Quadrature::uniform(n), |_| 1.0).expect("uniform density")
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density_values(&self) -> &[f64] {
        &self.density_values
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.quadrature_weights
    }

    /// `∫ f ρ du`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .iter()
            .zip(&self.density_values)
            .zip(&self.quadrature_weights)
            .map(|((&u, &r), &w)| w * r * f(u))
            .sum()
    }

    /// `KL(ρ ‖ Λ) = ∫ ρ log ρ`, with `0 log 0 = 0`.
    pub fn kl_divergence(&self) -> f64 {
        self.density_values
            .iter()
            .zip(&self.quadrature_weights)
            .filter(|(r, _)| **r > 0.0)
            .map(|(r, w)| w * r * r.ln())
            .sum()
    }

    /// The atomic measure `∑ w_i ρ_i δ_{u_i}` on `[0,1]`.
    pub fn to_discrete(&self) -> DiscreteMeasure {
        let atoms = self
            .grid
            .iter()
            .zip(&self.density_values)
            .zip(&self.quadrature_weights)
            .filter(|((_, r), _)| **r > 0.0)
            .map(|((&u, &r), &w)| (u, r * w))
            .collect();
        DiscreteMeasure::new(atoms).expect("positive masses")
    }

    /// Discretized `τ⋆(ρ du)`.
    pub fn pushforward(&self, tau: &WeightFunction) -> Result<DiscreteMeasure, MeasureError> {
        self.to_discrete().pushforward(tau)
    }

    /// Serializable rows `(node, density)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .copied()
            .zip(self.density_values.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec()).unwrap()
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(m(&[(3.0, 1.0)]).integrate(|t| t), 3.0);
        assert_eq!(m(&[(0.0, 0.5), (2.0, 0.5)]).integrate(|t| t), 1.0);
        let weights = [0.1, 0.4, 0.2, 0.3];
        let nu = DiscreteMeasure::from_values(&weights, 0.25).unwrap();
        assert!((4.0 * nu.integrate(|t| t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(m(&[(0.5, 2.0)]).normalize(), m(&[(0.5, 1.0)]));
        assert!(DiscreteMeasure::zero().normalize().is_zero());
        assert_eq!(
            m(&[(0.0, 1.0), (1.0, 3.0)]).normalize(),
            m(&[(0.0, 0.25), (1.0, 0.75)])
        );
    }

    #[test]
    fn canonicalize_merges_exact_repeats() {
        let c = m(&[(1.0, 0.25), (0.0, 0.25), (1.0, 0.5)]).canonicalize();
        assert_eq!(c.atoms(), &[(0.0, 0.25), (1.0, 0.75)]);
    }

    #[test]
    fn wasserstein_examples() {
        let d = DiscreteMeasure::dirac;
        assert_eq!(wasserstein(&d(0.3), &d(0.3)).unwrap(), 0.0);
        assert_eq!(wasserstein(&d(0.0), &d(1.0)).unwrap(), 1.0);
        let a = m(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = m(&[(0.0, 0.5), (0.5, 0.5)]);
        assert!((wasserstein(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            wasserstein(&m(&[(0.0, 0.5)]), &d(0.0)),
            Err(MeasureError::NotProbability(_))
        ));
    }

    #[test]
    fn extended_wasserstein_examples() {
        let two = |x| m(&[(x, 2.0)]);
        assert_eq!(wasserstein_extended(&two(0.5), &two(0.5)).unwrap(), 0.0);
        assert_eq!(
            wasserstein_extended(&DiscreteMeasure::dirac(0.0), &two(0.0)).unwrap(),
            1.0
        );
        assert_eq!(
            wasserstein_extended(&two(0.0), &DiscreteMeasure::dirac(1.0)).unwrap(),
            2.0
        );
        assert!(matches!(
            wasserstein_extended(&m(&[(0.0, 0.5)]), &two(0.0)),
            Err(MeasureError::MassBelowOne(_))
        ));
    }

    #[test]
    fn total_variation_examples() {
        let d = DiscreteMeasure::dirac;
        assert_eq!(total_variation(&d(0.0), &d(0.0)).unwrap(), 0.0);
        assert_eq!(total_variation(&d(0.0), &d(1.0)).unwrap(), 1.0);
        let a = m(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = m(&[(0.0, 0.25), (1.0, 0.75)]);
        assert!((total_variation(&a, &b).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        assert!(GriddedDensity::uniform(DEFAULT_GRID).kl_divergence().abs() < 1e-14);
        let q = Quadrature::uniform(DEFAULT_GRID);
        let half = GriddedDensity::from_fn(&q, |u| if u <= 0.5 { 2.0 } else { 0.0 }).unwrap();
        assert!((half.kl_divergence() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pushforward_examples() {
        let seven = WeightFunction::constant(7.0);
        assert_eq!(
            DiscreteMeasure::dirac(0.5).pushforward(&seven).unwrap(),
            DiscreteMeasure::dirac(7.0)
        );
        let ind = WeightFunction::indicator(0.5, 1.0).unwrap();
        let two = m(&[(0.25, 0.5), (0.75, 0.5)]);
        assert_eq!(two.pushforward(&ind).unwrap(), m(&[(0.0, 0.5), (1.0, 0.5)]));
        assert_eq!(two.pushforward_positive(&ind).unwrap(), m(&[(1.0, 0.5)]));
        let zero = WeightFunction::constant(0.0);
        assert!(two.pushforward_positive(&zero).unwrap().is_zero());
    }

    #[test]
    fn adapted_grid_splits_at_jumps() {
        let q = Quadrature::adapted(4, &[0.3, 0.5, 0.0]);
        assert_eq!(q.len(), 5);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
    }
}
