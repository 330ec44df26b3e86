//! Sample summaries with Student-t confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided confidence level used throughout the lab.
pub const CONFIDENCE: f64 = 0.99;

/// Two-sided Student-t critical value for `level` with `dof` degrees of freedom.
pub fn t_critical(level: f64, dof: usize) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    let t = StudentsT::new(0.0, 1.0, dof as f64).expect("positive degrees of freedom");
    t.inverse_cdf(0.5 + level / 2.0)
}

/// Mean, sample standard deviation and a two-sided t interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Summary {
    /// Summarizes `values` at [`CONFIDENCE`]. Values are accumulated in the
    /// given order, so the result depends only on the sequence.
    pub fn of(values: &[f64]) -> Self {
        Self::with_level(values, CONFIDENCE)
    }

    pub fn with_level(values: &[f64], level: f64) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                sd: f64::NAN,
                ci_lo: f64::NAN,
                ci_hi: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = if sd == 0.0 {
            0.0
        } else {
            t_critical(level, count - 1) * sd / (count as f64).sqrt()
        };
        Self {
            count,
            mean,
            sd,
            ci_lo: mean - half,
            ci_hi: mean + half,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_lo <= x && x <= self.ci_hi
    }
}

/// Delta-method interval for the ratio `mean(a) / mean(b)` of paired samples.
pub fn ratio_interval(a: &[f64], b: &[f64], level: f64) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let r = ma / mb;
    let influence: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - r * y) / mb).collect();
    let s = Summary::with_level(&influence, level);
    (r, s.half_width())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_t_quantile() {
        // t_{0.995, 10} = 3.169273
        assert!((t_critical(0.99, 10) - 3.169_272_672_6).abs() < 1e-6);
    }

    #[test]
    fn constant_samples_give_degenerate_interval() {
        let s = Summary::of(&[1.0; 20]);
        assert_eq!((s.mean, s.sd, s.ci_lo, s.ci_hi), (1.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn summary_of_small_sample() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
        assert!(s.contains(2.0));
    }
}
