//! Coupling functions `τ: [0,1] → R` and their perturbations.
//!
//! An edge (or vertex) weight is always realized as `τ(U)` with `U` uniform
//! on `[0,1]`, so one uniform field drives every weight law at once. This is
//! what makes coupled experiments (same seed, different `τ`) exact.
//!
//! Every variant can describe itself as a finite list of [`Piece`]s: cells of
//! `[0,1]` on which `τ` is either constant or continuous and monotone. The
//! piece list gives exact atoms, essential infima, and quadrature breakpoints
//! without sampling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Evaluation value used for `F⁻¹(1)` when the law is unbounded.
pub const DEFAULT_CAP: f64 = 1e9;

/// Grid size for the construction-time nonnegativity scan.
const NONNEG_SCAN_POINTS: usize = 100_000;

/// Default truncation index for countable-atom laws.
pub const DEFAULT_TRUNCATION: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("argument u = {0} lies outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("invalid weight specification: {0}")]
    Invalid(String),
    #[error("weight function takes the negative value {value} at u = {u}")]
    Negative { u: f64, value: f64 },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, WeightError> {
    Err(WeightError::Invalid(msg.into()))
}

/// How a shift by `h` is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// `τ + h`
    AddEverywhere,
    /// `τ + h·1{τ > 0}`; the zero set is untouched.
    AddOnPositive,
}

/// Measurable `τ: [0,1] → R`, the coupling kernel `τ_e = τ(U_e)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    InverseCdf(InverseCdf),
    #[serde(rename = "piecewise")]
    PiecewiseConstant(PiecewiseConstant),
    #[serde(rename = "countable")]
    CountableAtoms(CountableAtoms),
    Analytic(Analytic),
    #[serde(rename = "shift")]
    Shifted {
        base: Box<WeightFunction>,
        h: f64,
        mode: ShiftMode,
    },
    /// `τ + h·ψ`
    #[serde(rename = "perturb")]
    Perturbed {
        base: Box<WeightFunction>,
        direction: Box<WeightFunction>,
        h: f64,
    },
    #[serde(rename = "scale")]
    Scaled {
        base: Box<WeightFunction>,
        factor: f64,
    },
    /// `1{τ > 0}`
    PositiveIndicator {
        base: Box<WeightFunction>,
    },
}

/// Closed-form coupling functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum Analytic {
    Identity,
    Square,
    Power { exponent: f64 },
    Constant { value: f64 },
    Affine { offset: f64, slope: f64 },
}

/// Right-continuous inverse `F⁻¹(u) = inf{t : F(t) ≥ u}` of a named law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InverseCdf {
    Exponential {
        rate: f64,
        #[serde(default = "default_cap")]
        cap: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// Finitely many atoms; the step CDF's breakpoints.
    Atoms(AtomLaw),
}

fn default_cap() -> f64 {
    DEFAULT_CAP
}

/// Cumulative step table shared by the atomic variants.
#[derive(Clone, Debug, PartialEq)]
struct StepTable {
    /// `cumulative[i] = p_0 + … + p_i`, last entry forced to exactly 1.
    cumulative: Vec<f64>,
    values: Vec<f64>,
    /// `(c_{i-1}, c_i]` cells (inverse-CDF convention) instead of `[c_{i-1}, c_i)`.
    right_closed: bool,
}

impl StepTable {
    fn new(probs: &[f64], values: &[f64], right_closed: bool) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc.min(1.0)
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            cumulative,
            values: values.to_vec(),
            right_closed,
        }
    }

    #[inline]
    fn index(&self, u: f64) -> usize {
        let idx = if self.right_closed {
            self.cumulative.partition_point(|&c| c < u)
        } else {
            self.cumulative.partition_point(|&c| c <= u)
        };
        idx.min(self.values.len() - 1)
    }

    #[inline]
    fn eval(&self, u: f64) -> f64 {
        self.values[self.index(u)]
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.cumulative
            .iter()
            .copied()
            .filter(|&c| c > 0.0 && c < 1.0)
            .collect()
    }
}

/// Partition `I_i = [p_0 + … + p_{i-1}, p_0 + … + p_i)` of `[0,1)` with
/// value `values[i]` on `I_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseSpec", into = "PiecewiseSpec")]
pub struct PiecewiseConstant {
    probs: Vec<f64>,
    values: Vec<f64>,
    table: StepTable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PiecewiseSpec {
    probs: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<PiecewiseSpec> for PiecewiseConstant {
    type Error = WeightError;
    fn try_from(spec: PiecewiseSpec) -> Result<Self, Self::Error> {
        PiecewiseConstant::new(spec.probs, spec.values)
    }
}

impl From<PiecewiseConstant> for PiecewiseSpec {
    fn from(p: PiecewiseConstant) -> Self {
        PiecewiseSpec {
            probs: p.probs,
            values: p.values,
        }
    }
}

fn check_probability_vector(probs: &[f64]) -> Result<(), WeightError> {
    if probs.is_empty() {
        return invalid("probability vector is empty");
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return invalid("probabilities must be finite and nonnegative");
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("probabilities sum to {total}, not 1"));
    }
    Ok(())
}

impl PiecewiseConstant {
    pub fn new(probs: Vec<f64>, values: Vec<f64>) -> Result<Self, WeightError> {
        if probs.len() != values.len() {
            return invalid(format!(
                "{} probabilities but {} values",
                probs.len(),
                values.len()
            ));
        }
        check_probability_vector(&probs)?;
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("piecewise values must be finite");
        }
        let table = StepTable::new(&probs, &values, false);
        Ok(Self {
            probs,
            values,
            table,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The cell `I_i` as `(start, end)`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let start = if i == 0 {
            0.0
        } else {
            self.table.cumulative[i - 1]
        };
        (start, self.table.cumulative[i])
    }
}

/// A finite law `Σ probs[i] δ_{values[i]}` realized through its inverse CDF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AtomSpec", into = "AtomSpec")]
pub struct AtomLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
    table: StepTable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AtomSpec {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<AtomSpec> for AtomLaw {
    type Error = WeightError;
    fn try_from(spec: AtomSpec) -> Result<Self, Self::Error> {
        AtomLaw::new(spec.values, spec.probs)
    }
}

impl From<AtomLaw> for AtomSpec {
    fn from(a: AtomLaw) -> Self {
        AtomSpec {
            values: a.values,
            probs: a.probs,
        }
    }
}

impl AtomLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, WeightError> {
        if probs.len() != values.len() {
            return invalid("atom values and probabilities differ in length");
        }
        check_probability_vector(&probs)?;
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("atom locations must be finite");
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let sorted_probs: Vec<f64> = order.iter().map(|&i| probs[i]).collect();
        let table = StepTable::new(&sorted_probs, &sorted_values, true);
        Ok(Self {
            values,
            probs,
            table,
        })
    }
}

/// `p_0 δ_0 + Σ_{i ≤ M} p_i δ_{β_i t_i}`, a truncation of a countable law.
///
/// The cell `I_0` carries the zero atom; `I_i` carries `β_i t_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CountableSpec", into = "CountableSpec")]
pub struct CountableAtoms {
    p0: f64,
    probs: Vec<f64>,
    scales: Vec<f64>,
    multipliers: Vec<f64>,
    truncation_defect: f64,
    table: StepTable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CountableSpec {
    p0: f64,
    probs: Vec<f64>,
    scales: Vec<f64>,
    multipliers: Vec<f64>,
    #[serde(default)]
    truncation_defect: f64,
}

impl TryFrom<CountableSpec> for CountableAtoms {
    type Error = WeightError;
    fn try_from(s: CountableSpec) -> Result<Self, Self::Error> {
        let mut c = CountableAtoms::new(s.p0, s.probs, s.scales, s.multipliers)?;
        c.truncation_defect = s.truncation_defect;
        Ok(c)
    }
}

impl From<CountableAtoms> for CountableSpec {
    fn from(c: CountableAtoms) -> Self {
        CountableSpec {
            p0: c.p0,
            probs: c.probs,
            scales: c.scales,
            multipliers: c.multipliers,
            truncation_defect: c.truncation_defect,
        }
    }
}

impl CountableAtoms {
    pub fn new(
        p0: f64,
        probs: Vec<f64>,
        scales: Vec<f64>,
        multipliers: Vec<f64>,
    ) -> Result<Self, WeightError> {
        let m = probs.len();
        if m == 0 || scales.len() != m || multipliers.len() != m {
            return invalid("countable atoms need equally long, nonempty p, β, t sequences");
        }
        if !(0.0..1.0).contains(&p0) {
            return invalid("p0 must lie in [0, 1)");
        }
        if probs
            .iter()
            .any(|p| !(p.is_finite() && *p > 0.0 && *p < 1.0))
        {
            return invalid("atom probabilities must lie in (0, 1)");
        }
        if scales.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return invalid("scales β_i must be positive");
        }
        if multipliers.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return invalid("multipliers t_i must be finite and nonnegative");
        }
        let mut all_probs = Vec::with_capacity(m + 1);
        all_probs.push(p0);
        all_probs.extend_from_slice(&probs);
        check_probability_vector(&all_probs)?;
        let mut values = Vec::with_capacity(m + 1);
        values.push(0.0);
        values.extend(scales.iter().zip(&multipliers).map(|(b, t)| b * t));
        let table = StepTable::new(&all_probs, &values, false);
        let atoms = Self {
            p0,
            probs,
            scales,
            multipliers,
            truncation_defect: 0.0,
            table,
        };
        if !atoms.summability().is_finite() {
            return invalid("Σ β_i / log(1/p_i) is not finite");
        }
        Ok(atoms)
    }

    /// A discrete law with dense support: `β` enumerates the positive
    /// rationals (Calkin–Wilf order), `p_i ∝ exp(-i^decay_power)`, and
    /// `t_i = 2 + (-1)^i/(i+1)²` has bounded variation with values in `[1,3]`.
    ///
    /// The mass beyond index `truncation` is folded into the last atom.
    pub fn dense_discrete(
        p0: f64,
        truncation: usize,
        decay_power: f64,
    ) -> Result<Self, WeightError> {
        if truncation == 0 || decay_power.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
            return invalid("dense_discrete needs truncation ≥ 1 and decay_power > 1");
        }
        let weight = |i: usize| (-(i as f64).powf(decay_power)).exp();
        // Tail sum until the terms underflow.
        let total: f64 = (1..)
            .map(weight)
            .take_while(|w| *w > 0.0)
            .take(1_000_000)
            .sum();
        let mut probs: Vec<f64> = (1..=truncation)
            .map(|i| (1.0 - p0) * weight(i) / total)
            .collect();
        // Terms that underflow to zero are dropped; the mass lives on in the defect.
        let kept = probs.iter().take_while(|p| **p > 0.0).count();
        probs.truncate(kept);
        let kept_mass: f64 = probs.iter().sum();
        let defect = (1.0 - p0) - kept_mass;
        if let Some(last) = probs.last_mut() {
            *last += defect;
        }
        let scales: Vec<f64> = calkin_wilf().take(probs.len()).collect();
        let multipliers: Vec<f64> = (1..=probs.len())
            .map(|i| 2.0 + if i % 2 == 0 { 1.0 } else { -1.0 } / ((i + 1) as f64).powi(2))
            .collect();
        let mut atoms = Self::new(p0, probs, scales, multipliers)?;
        atoms.truncation_defect = defect;
        Ok(atoms)
    }

    /// The surrogate `Σ_{i ≤ M} β_i / log(1/p_i)` of the summability condition.
    pub fn summability(&self) -> f64 {
        self.scales
            .iter()
            .zip(&self.probs)
            .map(|(b, p)| b / (1.0 / p).ln())
            .sum()
    }

    pub fn truncation(&self) -> usize {
        self.probs.len()
    }

    pub fn truncation_defect(&self) -> f64 {
        self.truncation_defect
    }

    /// Atom list `(value, probability)` including the zero atom.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, self.p0))
            .chain(
                self.scales
                    .iter()
                    .zip(&self.multipliers)
                    .zip(&self.probs)
                    .map(|((b, t), p)| (b * t, *p)),
            )
            .collect()
    }
}

/// Calkin–Wilf enumeration of the positive rationals: 1, 1/2, 2, 1/3, 3/2, …
pub fn calkin_wilf() -> impl Iterator<Item = f64> {
    std::iter::successors(Some((1u64, 1u64)), |&(a, b)| {
        // next = b / (a + b - 2 (a mod b))
        let next_num = b;
        let next_den = a + b - 2 * (a % b);
        Some((next_num, next_den))
    })
    .map(|(a, b)| a as f64 / b as f64)
}

/// What `τ` looks like on one cell of `[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Constant(f64),
    /// Continuous and non-constant. `inf`/`sup` are exact when `tight`,
    /// otherwise they are valid bounds.
    Varying {
        inf: f64,
        sup: f64,
        tight: bool,
    },
}

impl Shape {
    pub fn inf(&self) -> f64 {
        match *self {
            Shape::Constant(v) => v,
            Shape::Varying { inf, .. } => inf,
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Shape::Constant(v) => v,
            Shape::Varying { sup, .. } => sup,
        }
    }

    fn is_tight(&self) -> bool {
        match *self {
            Shape::Constant(_) => true,
            Shape::Varying { tight, .. } => tight,
        }
    }

    fn varying(a: f64, b: f64) -> Shape {
        Shape::Varying {
            inf: a.min(b),
            sup: a.max(b),
            tight: true,
        }
    }
}

/// A cell `[lo, hi)` with the shape of `τ` on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub shape: Shape,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Structural facts about the law `τ⋆Λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightLawSummary {
    /// `P(τ = 0)`; this is `F(0)` when the weights are nonnegative.
    pub zero_mass: f64,
    /// Essential infimum `𝔟` of the law.
    pub essential_infimum: f64,
    /// `P(τ = 𝔟)`.
    pub atom_at_infimum_mass: f64,
    /// Essential infimum of the law restricted to `{τ > 0}`, if that set has mass.
    pub positive_infimum: Option<f64>,
    /// `F(h) = F(0)` for some `h > 0`: no mass in `(0, h)`.
    pub mass_gap: bool,
    /// False when some composite piece only yields a bound for `𝔟`.
    pub exact: bool,
    /// Minimum of `τ` over a midpoint grid, as an independent sanity value.
    pub grid_minimum: f64,
    pub grid_size: usize,
}

impl WeightFunction {
    pub fn identity() -> Self {
        WeightFunction::Analytic(Analytic::Identity)
    }

    pub fn square() -> Self {
        WeightFunction::Analytic(Analytic::Square)
    }

    pub fn power(exponent: f64) -> Self {
        WeightFunction::Analytic(Analytic::Power { exponent })
    }

    pub fn constant(value: f64) -> Self {
        WeightFunction::Analytic(Analytic::Constant { value })
    }

    pub fn affine(offset: f64, slope: f64) -> Self {
        WeightFunction::Analytic(Analytic::Affine { offset, slope })
    }

    pub fn exponential(rate: f64) -> Self {
        WeightFunction::InverseCdf(InverseCdf::Exponential {
            rate,
            cap: DEFAULT_CAP,
        })
    }

    pub fn uniform(low: f64, high: f64) -> Self {
        WeightFunction::InverseCdf(InverseCdf::Uniform { low, high })
    }

    pub fn atoms(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, WeightError> {
        Ok(WeightFunction::InverseCdf(InverseCdf::Atoms(AtomLaw::new(
            values, probs,
        )?)))
    }

    pub fn piecewise(probs: Vec<f64>, values: Vec<f64>) -> Result<Self, WeightError> {
        Ok(WeightFunction::PiecewiseConstant(PiecewiseConstant::new(
            probs, values,
        )?))
    }

    /// `p δ_low + (1-p) δ_high` with the low atom on `[0, p)`.
    pub fn two_atom(p_low: f64, low: f64, high: f64) -> Result<Self, WeightError> {
        Self::piecewise(vec![p_low, 1.0 - p_low], vec![low, high])
    }

    /// `1_{[a, b)}` (with `b = 1` meaning the closed right end).
    pub fn indicator(a: f64, b: f64) -> Result<Self, WeightError> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return invalid(format!("indicator needs 0 ≤ a < b ≤ 1, got [{a}, {b})"));
        }
        let mut probs = Vec::new();
        let mut values = Vec::new();
        if a > 0.0 {
            probs.push(a);
            values.push(0.0);
        }
        probs.push(b - a);
        values.push(1.0);
        if b < 1.0 {
            probs.push(1.0 - b);
            values.push(0.0);
        }
        Self::piecewise(probs, values)
    }

    pub fn shift(self, h: f64, mode: ShiftMode) -> Self {
        WeightFunction::Shifted {
            base: Box::new(self),
            h,
            mode,
        }
    }

    /// `self + h·direction`
    pub fn perturb(self, direction: WeightFunction, h: f64) -> Self {
        WeightFunction::Perturbed {
            base: Box::new(self),
            direction: Box::new(direction),
            h,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        WeightFunction::Scaled {
            base: Box::new(self),
            factor,
        }
    }

    /// `1{self > 0}`
    pub fn positive_indicator(&self) -> Self {
        WeightFunction::PositiveIndicator {
            base: Box::new(self.clone()),
        }
    }

    /// `τ(u)` with the argument checked.
    pub fn evaluate(&self, u: f64) -> Result<f64, WeightError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(WeightError::OutOfUnitInterval(u));
        }
        Ok(self.eval(u))
    }

    /// `τ(u)` for `u` already known to lie in `[0,1]`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u), "u = {u}");
        match self {
            WeightFunction::Analytic(a) => a.eval(u),
            WeightFunction::PiecewiseConstant(p) => p.table.eval(u),
            WeightFunction::CountableAtoms(c) => c.table.eval(u),
            WeightFunction::InverseCdf(f) => f.eval(u),
            WeightFunction::Shifted { base, h, mode } => {
                let t = base.eval(u);
                match mode {
                    ShiftMode::AddEverywhere => t + h,
                    ShiftMode::AddOnPositive if t > 0.0 => t + h,
                    ShiftMode::AddOnPositive => t,
                }
            }
            WeightFunction::Perturbed { base, direction, h } => {
                base.eval(u) + h * direction.eval(u)
            }
            WeightFunction::Scaled { base, factor } => factor * base.eval(u),
            WeightFunction::PositiveIndicator { base } => {
                if base.eval(u) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether `τ(u)` returns a cap value instead of `+∞`.
    pub fn hits_cap(&self, u: f64) -> bool {
        match self {
            WeightFunction::InverseCdf(InverseCdf::Exponential { .. }) => u >= 1.0,
            WeightFunction::Shifted { base, .. }
            | WeightFunction::Scaled { base, .. }
            | WeightFunction::PositiveIndicator { base } => base.hits_cap(u),
            WeightFunction::Perturbed {
                base, direction, ..
            } => base.hits_cap(u) || direction.hits_cap(u),
            _ => false,
        }
    }

    /// Structural validation plus, for base variants, a grid scan for
    /// negative values.
    pub fn validate(&self) -> Result<(), WeightError> {
        match self {
            WeightFunction::Analytic(a) => a.validate()?,
            WeightFunction::InverseCdf(f) => f.validate()?,
            WeightFunction::PiecewiseConstant(p) => {
                if p.values.iter().any(|v| *v < 0.0) {
                    return invalid("piecewise values must be nonnegative");
                }
            }
            WeightFunction::CountableAtoms(_) => {}
            WeightFunction::Shifted { base, h, .. } => {
                if !h.is_finite() {
                    return invalid("shift must be finite");
                }
                return base.validate();
            }
            WeightFunction::Perturbed { base, direction, h } => {
                if !h.is_finite() {
                    return invalid("perturbation size must be finite");
                }
                base.validate()?;
                return direction.validate();
            }
            WeightFunction::Scaled { base, factor } => {
                if !factor.is_finite() {
                    return invalid("scale factor must be finite");
                }
                return base.validate();
            }
            WeightFunction::PositiveIndicator { base } => return base.validate(),
        }
        let n = NONNEG_SCAN_POINTS;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let value = self.eval(u);
            if value < 0.0 || value.is_nan() {
                return Err(WeightError::Negative { u, value });
            }
        }
        Ok(())
    }

    /// Interior points of `(0,1)` where `τ` may jump or change formula.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut points = match self {
            WeightFunction::Analytic(_) => Vec::new(),
            WeightFunction::PiecewiseConstant(p) => p.table.breakpoints(),
            WeightFunction::CountableAtoms(c) => c.table.breakpoints(),
            WeightFunction::InverseCdf(InverseCdf::Atoms(a)) => a.table.breakpoints(),
            WeightFunction::InverseCdf(_) => Vec::new(),
            WeightFunction::Shifted { base, .. }
            | WeightFunction::Scaled { base, .. }
            | WeightFunction::PositiveIndicator { base } => base.breakpoints(),
            WeightFunction::Perturbed {
                base, direction, ..
            } => {
                let mut v = base.breakpoints();
                v.extend(direction.breakpoints());
                v
            }
        };
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    /// Endpoints of `[0,1]` where `τ′` is unbounded.
    pub fn singular_endpoints(&self) -> Vec<f64> {
        let mut points = match self {
            WeightFunction::Analytic(Analytic::Power { exponent })
                if *exponent < 1.0 && *exponent != 0.0 =>
            {
                vec![0.0]
            }
            WeightFunction::InverseCdf(InverseCdf::Exponential { .. }) => vec![1.0],
            WeightFunction::Shifted { base, .. }
            | WeightFunction::Scaled { base, .. }
            | WeightFunction::PositiveIndicator { base } => base.singular_endpoints(),
            WeightFunction::Perturbed {
                base, direction, ..
            } => {
                let mut v = base.singular_endpoints();
                v.extend(direction.singular_endpoints());
                v
            }
            _ => Vec::new(),
        };
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    /// Shape of `τ` on `[lo, hi]`, assuming no breakpoint lies strictly inside.
    pub fn shape_on(&self, lo: f64, hi: f64) -> Shape {
        match self {
            WeightFunction::Analytic(a) => a.shape_on(lo, hi),
            WeightFunction::PiecewiseConstant(p) => Shape::Constant(p.table.eval(0.5 * (lo + hi))),
            WeightFunction::CountableAtoms(c) => Shape::Constant(c.table.eval(0.5 * (lo + hi))),
            WeightFunction::InverseCdf(f) => f.shape_on(lo, hi),
            WeightFunction::Shifted { base, h, mode } => {
                let s = base.shape_on(lo, hi);
                match (mode, s) {
                    (ShiftMode::AddEverywhere, Shape::Constant(v)) => Shape::Constant(v + h),
                    (ShiftMode::AddEverywhere, Shape::Varying { inf, sup, tight }) => {
                        Shape::Varying {
                            inf: inf + h,
                            sup: sup + h,
                            tight,
                        }
                    }
                    (ShiftMode::AddOnPositive, Shape::Constant(v)) => {
                        Shape::Constant(if v > 0.0 { v + h } else { v })
                    }
                    // A continuous non-constant piece meets {τ = 0} in a null set.
                    (ShiftMode::AddOnPositive, Shape::Varying { inf, sup, tight }) => {
                        if inf >= 0.0 {
                            Shape::Varying {
                                inf: inf + h,
                                sup: sup + h,
                                tight,
                            }
                        } else if sup <= 0.0 {
                            s
                        } else {
                            Shape::Varying {
                                inf: inf.min(*h),
                                sup: sup + h,
                                tight: false,
                            }
                        }
                    }
                }
            }
            WeightFunction::Perturbed { base, direction, h } => {
                let a = base.shape_on(lo, hi);
                let b = direction.shape_on(lo, hi);
                match (a, b) {
                    (Shape::Constant(x), Shape::Constant(y)) => Shape::Constant(x + h * y),
                    _ if *h == 0.0 => a,
                    _ => {
                        let (binf, bsup) = scaled_range(b, *h);
                        // Interval arithmetic is only exact when one side is flat.
                        let tight = match (a, b) {
                            (Shape::Constant(_), _) => b.is_tight(),
                            (_, Shape::Constant(_)) => a.is_tight(),
                            _ => false,
                        };
                        Shape::Varying {
                            inf: a.inf() + binf,
                            sup: a.sup() + bsup,
                            tight,
                        }
                    }
                }
            }
            WeightFunction::Scaled { base, factor } => match base.shape_on(lo, hi) {
                Shape::Constant(v) => Shape::Constant(factor * v),
                s @ Shape::Varying { tight, .. } => {
                    if *factor == 0.0 {
                        Shape::Constant(0.0)
                    } else {
                        let (inf, sup) = scaled_range(s, *factor);
                        Shape::Varying { inf, sup, tight }
                    }
                }
            },
            WeightFunction::PositiveIndicator { base } => match base.shape_on(lo, hi) {
                Shape::Constant(v) => Shape::Constant(if v > 0.0 { 1.0 } else { 0.0 }),
                Shape::Varying { inf, sup, .. } => {
                    if inf >= 0.0 {
                        Shape::Constant(1.0)
                    } else if sup <= 0.0 {
                        Shape::Constant(0.0)
                    } else {
                        Shape::Varying {
                            inf: 0.0,
                            sup: 1.0,
                            tight: false,
                        }
                    }
                }
            },
        }
    }

    /// Decomposition of `[0,1]` into cells on which `τ` has a known shape.
    pub fn pieces(&self) -> Vec<Piece> {
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints());
        edges.push(1.0);
        edges
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| Piece {
                lo: w[0],
                hi: w[1],
                shape: self.shape_on(w[0], w[1]),
            })
            .collect()
    }

    /// Law summary from the piece structure; `grid_size` only feeds the
    /// independent grid-minimum diagnostic.
    pub fn summarize(&self, grid_size: usize) -> WeightLawSummary {
        let pieces = self.pieces();
        let mut zero_mass = 0.0;
        let mut ess_inf = f64::INFINITY;
        let mut exact = true;
        for p in &pieces {
            exact &= p.shape.is_tight();
            ess_inf = ess_inf.min(p.shape.inf());
            if p.shape == Shape::Constant(0.0) {
                zero_mass += p.len();
            }
        }
        let atom_at_infimum_mass: f64 = pieces
            .iter()
            .filter(|p| p.shape == Shape::Constant(ess_inf))
            .map(Piece::len)
            .sum();
        let positive_infimum = pieces
            .iter()
            .filter(|p| p.shape.sup() > 0.0)
            .map(|p| p.shape.inf().max(0.0))
            .reduce(f64::min);
        let grid_size = grid_size.max(1);
        let grid_minimum = (0..grid_size)
            .map(|i| self.eval((i as f64 + 0.5) / grid_size as f64))
            .fold(f64::INFINITY, f64::min);
        WeightLawSummary {
            zero_mass,
            essential_infimum: ess_inf,
            atom_at_infimum_mass,
            positive_infimum,
            mass_gap: positive_infimum.is_some_and(|b| b > 0.0),
            exact,
            grid_minimum,
            grid_size,
        }
    }

    /// Atom list `(value, mass)` when the law is purely atomic.
    pub fn atom_list(&self) -> Option<Vec<(f64, f64)>> {
        let pieces = self.pieces();
        let mut atoms = Vec::with_capacity(pieces.len());
        for p in pieces {
            match p.shape {
                Shape::Constant(v) => atoms.push((v, p.len())),
                Shape::Varying { .. } => return None,
            }
        }
        Some(atoms)
    }

    /// No flat piece of positive length, so `τ(U)` has no atoms.
    pub fn is_atomless(&self) -> bool {
        self.pieces()
            .iter()
            .all(|p| !matches!(p.shape, Shape::Constant(_)) || p.len() == 0.0)
    }
}

fn scaled_range(s: Shape, factor: f64) -> (f64, f64) {
    let (a, b) = (factor * s.inf(), factor * s.sup());
    // 0·∞ would be NaN; a zero factor flattens the piece.
    let fix = |x: f64| if x.is_nan() { 0.0 } else { x };
    (fix(a.min(b)), fix(a.max(b)))
}

impl Analytic {
    #[inline]
    fn eval(&self, u: f64) -> f64 {
        match *self {
            Analytic::Identity => u,
            Analytic::Square => u * u,
            Analytic::Power { exponent } => u.powf(exponent),
            Analytic::Constant { value } => value,
            Analytic::Affine { offset, slope } => offset + slope * u,
        }
    }

    fn validate(&self) -> Result<(), WeightError> {
        match *self {
            Analytic::Power { exponent } if !(exponent.is_finite() && exponent > 0.0) => {
                invalid("power exponent must be positive")
            }
            Analytic::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                invalid("constant weight must be finite and nonnegative")
            }
            Analytic::Affine { offset, slope }
                if !(offset.is_finite()
                    && slope.is_finite()
                    && offset >= 0.0
                    && offset + slope >= 0.0) =>
            {
                invalid("affine weight must be nonnegative on [0, 1]")
            }
            _ => Ok(()),
        }
    }

    fn shape_on(&self, lo: f64, hi: f64) -> Shape {
        match *self {
            Analytic::Constant { value } => Shape::Constant(value),
            Analytic::Affine { offset, slope: 0.0 } => Shape::Constant(offset),
            _ => Shape::varying(self.eval(lo), self.eval(hi)),
        }
    }
}

impl InverseCdf {
    #[inline]
    fn eval(&self, u: f64) -> f64 {
        match self {
            InverseCdf::Exponential { rate, cap } => {
                if u >= 1.0 {
                    *cap
                } else {
                    -(-u).ln_1p() / rate
                }
            }
            InverseCdf::Uniform { low, high } => low + (high - low) * u,
            InverseCdf::Atoms(a) => a.table.eval(u),
        }
    }

    fn validate(&self) -> Result<(), WeightError> {
        match self {
            InverseCdf::Exponential { rate, cap } => {
                if !(rate.is_finite() && *rate > 0.0 && cap.is_finite() && *cap > 0.0) {
                    return invalid("exponential law needs positive finite rate and cap");
                }
            }
            InverseCdf::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && 0.0 <= *low && low <= high) {
                    return invalid("uniform law needs 0 ≤ low ≤ high");
                }
            }
            InverseCdf::Atoms(a) => {
                if a.values.iter().any(|v| *v < 0.0) {
                    return invalid("atom locations must be nonnegative");
                }
            }
        }
        Ok(())
    }

    fn shape_on(&self, lo: f64, hi: f64) -> Shape {
        match self {
            InverseCdf::Exponential { rate, .. } => {
                let at = |u: f64| {
                    if u >= 1.0 {
                        f64::INFINITY
                    } else {
                        -(-u).ln_1p() / rate
                    }
                };
                Shape::varying(at(lo), at(hi))
            }
            InverseCdf::Uniform { low, high } if low == high => Shape::Constant(*low),
            InverseCdf::Uniform { .. } => Shape::varying(self.eval(lo), self.eval(hi)),
            InverseCdf::Atoms(a) => Shape::Constant(a.table.eval(0.5 * (lo + hi))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_returns_exact_zero_on_first_cell() {
        let tau = WeightFunction::piecewise(vec![0.5, 0.5], vec![0.0, 2.0]).unwrap();
        assert_eq!(tau.evaluate(0.25).unwrap().to_bits(), 0.0f64.to_bits());
        assert_eq!(tau.evaluate(0.75).unwrap(), 2.0);
        // Cells are [c_{i-1}, c_i): the boundary belongs to the right cell.
        assert_eq!(tau.evaluate(0.5).unwrap(), 2.0);
        assert_eq!(tau.evaluate(1.0).unwrap(), 2.0);
    }

    #[test]
    fn exponential_inverse_cdf() {
        let tau = WeightFunction::exponential(1.0);
        let u = 1.0 - (-1.0f64).exp();
        assert!((tau.evaluate(u).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(tau.evaluate(0.0).unwrap(), 0.0);
        assert_eq!(tau.evaluate(1.0).unwrap(), DEFAULT_CAP);
        assert!(tau.hits_cap(1.0));
        assert!(!tau.hits_cap(0.999));
    }

    #[test]
    fn atom_inverse_cdf_uses_right_continuous_convention() {
        // F jumps by 0.3 at 1 and by 0.7 at 4. F⁻¹(0.3) = inf{t : F(t) ≥ 0.3} = 1.
        let tau = WeightFunction::atoms(vec![4.0, 1.0], vec![0.7, 0.3]).unwrap();
        assert_eq!(tau.evaluate(0.0).unwrap(), 1.0);
        assert_eq!(tau.evaluate(0.3).unwrap(), 1.0);
        assert_eq!(tau.evaluate(0.300001).unwrap(), 4.0);
        assert_eq!(tau.evaluate(1.0).unwrap(), 4.0);
    }

    #[test]
    fn rejects_arguments_outside_unit_interval() {
        let tau = WeightFunction::identity();
        assert_eq!(tau.evaluate(1.5), Err(WeightError::OutOfUnitInterval(1.5)));
        assert!(tau.evaluate(-0.1).is_err());
    }

    #[test]
    fn shifts() {
        let one = WeightFunction::constant(1.0).shift(0.5, ShiftMode::AddEverywhere);
        assert_eq!(one.evaluate(0.3).unwrap(), 1.5);
        let pc = WeightFunction::piecewise(vec![0.5, 0.5], vec![0.0, 1.0])
            .unwrap()
            .shift(0.5, ShiftMode::AddOnPositive);
        assert_eq!(pc.evaluate(0.25).unwrap(), 0.0);
        assert_eq!(pc.evaluate(0.75).unwrap(), 1.5);
    }

    #[test]
    fn summaries() {
        let s = WeightFunction::piecewise(vec![0.6, 0.4], vec![0.0, 1.0])
            .unwrap()
            .summarize(1000);
        assert_eq!(s.zero_mass, 0.6);
        assert_eq!(s.essential_infimum, 0.0);
        assert_eq!(s.atom_at_infimum_mass, 0.6);
        assert_eq!(s.positive_infimum, Some(1.0));
        assert!(s.mass_gap);

        let s = WeightFunction::identity().summarize(1000);
        assert_eq!(
            (s.zero_mass, s.essential_infimum, s.atom_at_infimum_mass),
            (0.0, 0.0, 0.0)
        );
        assert!(!s.mass_gap);
        assert!(s.exact);

        // u + 0.5·1{u > 0}: positive almost everywhere, so the law lives on [0.5, 1.5].
        let s = WeightFunction::identity()
            .shift(0.5, ShiftMode::AddOnPositive)
            .summarize(10_000);
        assert_eq!(s.zero_mass, 0.0);
        assert_eq!(s.essential_infimum, 0.5);
        assert_eq!(s.atom_at_infimum_mass, 0.0);
        assert!(s.mass_gap);
        // Independent grid scan agrees to grid resolution.
        assert!((s.grid_minimum - 0.5).abs() <= 1.0 / 10_000.0);
    }

    #[test]
    fn perturbed_piece_bounds() {
        // u + h·1_{[1/2, 1]}
        let tau =
            WeightFunction::identity().perturb(WeightFunction::indicator(0.5, 1.0).unwrap(), 0.3);
        let pieces = tau.pieces();
        assert_eq!(pieces.len(), 2);
        assert_eq!(
            pieces[1].shape,
            Shape::Varying {
                inf: 0.8,
                sup: 1.3,
                tight: true
            }
        );
        let s = tau.summarize(100);
        assert_eq!(s.essential_infimum, 0.0);
        assert!(s.exact);
    }

    #[test]
    fn validation_catches_negative_values() {
        assert!(WeightFunction::affine(0.5, -1.0).validate().is_err());
        assert!(WeightFunction::affine(1.0, -1.0).validate().is_ok());
        assert!(WeightFunction::piecewise(vec![0.5, 0.4], vec![0.0, 1.0]).is_err());
        assert!(WeightFunction::piecewise(vec![0.5, 0.5], vec![0.0, -1.0])
            .unwrap()
            .validate()
            .is_err());
        // Composites may go negative (the tree permits it).
        assert!(WeightFunction::identity()
            .shift(-0.2, ShiftMode::AddEverywhere)
            .validate()
            .is_ok());
    }

    #[test]
    fn calkin_wilf_starts_correctly() {
        let v: Vec<f64> = calkin_wilf().take(7).collect();
        assert_eq!(v, vec![1.0, 0.5, 2.0, 1.0 / 3.0, 1.5, 2.0 / 3.0, 3.0]);
    }

    #[test]
    fn dense_discrete_recipe() {
        let c = CountableAtoms::dense_discrete(0.3, DEFAULT_TRUNCATION, 1.5).unwrap();
        let atoms = c.atoms();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(c.summability().is_finite());
        assert!(c.truncation_defect() >= 0.0);
        assert!(c.multipliers.iter().all(|t| (1.0..=3.0).contains(t)));
    }

    #[test]
    fn json_round_trip() {
        let specs = vec![
            WeightFunction::identity(),
            WeightFunction::power(2.5),
            WeightFunction::exponential(2.0),
            WeightFunction::atoms(vec![0.0, 1.0], vec![0.4, 0.6]).unwrap(),
            WeightFunction::piecewise(vec![0.3, 0.7], vec![0.0, 1.0])
                .unwrap()
                .shift(0.25, ShiftMode::AddOnPositive),
            WeightFunction::CountableAtoms(CountableAtoms::dense_discrete(0.2, 64, 1.5).unwrap()),
            WeightFunction::identity()
                .perturb(WeightFunction::indicator(0.5, 1.0).unwrap(), 0.1)
                .scale(3.0),
            WeightFunction::identity().positive_indicator(),
        ];
        for spec in specs {
            let json = serde_json::to_string(&spec).unwrap();
            let back: WeightFunction = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec, "{json}");
        }
        let parsed: WeightFunction =
            serde_json::from_str(r#"{"kind":"piecewise","probs":[0.5,0.5],"values":[0,2]}"#)
                .unwrap();
        assert_eq!(parsed.evaluate(0.75).unwrap(), 2.0);
        let bad = serde_json::from_str::<WeightFunction>(
            r#"{"kind":"piecewise","probs":[0.5,0.6],"values":[0,2]}"#,
        );
        assert!(bad.is_err());
    }
}
