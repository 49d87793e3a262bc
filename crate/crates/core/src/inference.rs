//! Normal-theory intervals and p-values shared by every variance method.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::scalar::Scalar;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `z_p`, the p-quantile of the standard normal.
pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Two-sided p-value of a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    2.0 * std_normal().cdf(-z.abs())
}

/// Point estimate with a normal interval `τ̂ ± z_{1−α/2} SE`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inference<T> {
    pub estimate: T,
    pub se: T,
    pub ci_low: T,
    pub ci_high: T,
    pub p_value: f64,
}

impl<T: Scalar> Inference<T> {
    pub fn normal(estimate: T, se: T, alpha: f64) -> Self {
        let z = T::lit(normal_quantile(1.0 - alpha / 2.0));
        let half = z * se;
        let p_value = if se > T::zero() {
            two_sided_p((estimate / se).as_f64())
        } else if estimate == T::zero() {
            1.0
        } else {
            0.0
        };
        Inference {
            estimate,
            se,
            ci_low: estimate - half,
            ci_high: estimate + half,
            p_value,
        }
    }

    pub fn covers(&self, truth: T) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
        assert!((normal_quantile(0.75) - normal_quantile(0.25) - 1.3489795).abs() < 1e-7);
        // alpha = 0.32 gives a half-width of about one SE.
        assert!((normal_quantile(1.0 - 0.16) - 0.994458).abs() < 1e-6);
    }

    #[test]
    fn interval_and_p() {
        let inf = Inference::normal(0.10, 0.053, 0.05);
        assert!((inf.p_value - 0.059).abs() < 0.002);
        let degenerate = Inference::normal(0.3, 0.0, 0.05);
        assert_eq!((degenerate.ci_low, degenerate.ci_high), (0.3, 0.3));
        assert!(Inference::normal(1.0, 0.5, 0.05).covers(1.5));
    }
}
