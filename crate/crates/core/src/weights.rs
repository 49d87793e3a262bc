//! Selection functions, normalized (Hájek) weights and the point estimators:
//! weighted difference of means, regression imputation and doubly robust.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Target population of the contrast, indexed by `g(x) = a + b e(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimand {
    Ate,
    Att,
    Atc,
}

impl Estimand {
    pub const ALL: [Estimand; 3] = [Estimand::Ate, Estimand::Att, Estimand::Atc];

    /// `(a, b)` with `g(x) = a + b e(x)`.
    pub fn coefficients(self) -> (i32, i32) {
        match self {
            Estimand::Ate => (1, 0),
            Estimand::Att => (0, 1),
            Estimand::Atc => (1, -1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Estimand::Ate => "ATE",
            Estimand::Att => "ATT",
            Estimand::Atc => "ATC",
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ATE" => Ok(Estimand::Ate),
            "ATT" => Ok(Estimand::Att),
            "ATC" => Ok(Estimand::Atc),
            other => Err(Error::InvalidInput(format!("unknown estimand `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Weighting,
    Regression,
    DoublyRobust,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Weighting => "weighting",
            EstimatorKind::Regression => "regression",
            EstimatorKind::DoublyRobust => "doubly_robust",
        }
    }
}

/// Selection function values and the factor `f_i` such that `∂g(V_i)/∂β = f_i V_i'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub g: Array1<T>,
    pub dg_factor: Array1<T>,
}

pub fn selection_g<T: Scalar>(estimand: Estimand, e_hat: ArrayView1<'_, T>) -> Selection<T> {
    let (a, b) = estimand.coefficients();
    let (a, b) = (T::lit(a as f64), T::lit(b as f64));
    let g = e_hat.mapv(|e| a + b * e);
    let dg_factor = e_hat.mapv(|e| b * e * (T::one() - e));
    Selection { g, dg_factor }
}

/// Raw tilts `t(z, Z_i, x_i)` and their within-arm normalizations.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<T> {
    pub estimand: Estimand,
    pub tilt1: Array1<T>,
    pub tilt0: Array1<T>,
    pub w1: Array1<T>,
    pub w0: Array1<T>,
}

impl<T: Scalar> WeightSet<T> {
    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }

    /// Rebuilds a weight set from arbitrary non-negative tilts.
    pub fn from_tilts(estimand: Estimand, tilt1: Array1<T>, tilt0: Array1<T>) -> Result<Self> {
        let s1: T = tilt1.sum();
        let s0: T = tilt0.sum();
        if !(s1 > T::zero()) || !s1.is_finite() {
            return Err(Error::EmptyArm { arm: 1 });
        }
        if !(s0 > T::zero()) || !s0.is_finite() {
            return Err(Error::EmptyArm { arm: 0 });
        }
        let w1 = tilt1.mapv(|t| t / s1);
        let w0 = tilt0.mapv(|t| t / s0);
        Ok(WeightSet {
            estimand,
            tilt1,
            tilt0,
            w1,
            w0,
        })
    }
}

pub fn compute_weights<T: Scalar>(
    estimand: Estimand,
    treatment: &[bool],
    e_hat: ArrayView1<'_, T>,
) -> Result<WeightSet<T>> {
    if treatment.len() != e_hat.len() {
        return Err(Error::InvalidInput(
            "treatment and propensity lengths differ".into(),
        ));
    }
    if !treatment.iter().any(|&t| t) {
        return Err(Error::EmptyArm { arm: 1 });
    }
    if treatment.iter().all(|&t| t) {
        return Err(Error::EmptyArm { arm: 0 });
    }
    let n = treatment.len();
    let mut tilt1 = Array1::<T>::zeros(n);
    let mut tilt0 = Array1::<T>::zeros(n);
    let one = T::one();
    for (i, (&treated, &e)) in treatment.iter().zip(e_hat.iter()).enumerate() {
        if !(e >= T::zero() && e <= one) {
            return Err(Error::PositivityViolation {
                unit: i,
                value: e.as_f64(),
            });
        }
        // Positivity only matters where the tilt divides by e or 1 - e.
        let violates = match (estimand, treated) {
            (Estimand::Ate, true) | (Estimand::Atc, true) => e == T::zero(),
            (Estimand::Ate, false) | (Estimand::Att, false) => e == one,
            _ => false,
        };
        if violates {
            return Err(Error::PositivityViolation {
                unit: i,
                value: e.as_f64(),
            });
        }
        // g/e and g/(1-e) written out so the ATT/ATC cancellations are exact.
        match (estimand, treated) {
            (Estimand::Ate, true) => tilt1[i] = one / e,
            (Estimand::Ate, false) => tilt0[i] = one / (one - e),
            (Estimand::Att, true) => tilt1[i] = one,
            (Estimand::Att, false) => tilt0[i] = e / (one - e),
            (Estimand::Atc, true) => tilt1[i] = (one - e) / e,
            (Estimand::Atc, false) => tilt0[i] = one,
        }
    }
    WeightSet::from_tilts(estimand, tilt1, tilt0).map_err(|err| match err {
        // All tilts zero on an arm means every unit sits at the boundary.
        Error::EmptyArm { arm } => {
            let unit = treatment.iter().position(|&t| t == (arm == 1)).unwrap_or(0);
            Error::PositivityViolation {
                unit,
                value: e_hat[unit].as_f64(),
            }
        }
        other => other,
    })
}

/// `τ̂ = μ̂₁ − μ̂₀` with the two weighted components kept alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate<T> {
    pub estimand: Estimand,
    pub estimator: EstimatorKind,
    pub value: T,
    pub mu1: T,
    pub mu0: T,
}

impl<T: Scalar> PointEstimate<T> {
    fn new(estimand: Estimand, estimator: EstimatorKind, mu1: T, mu0: T) -> Self {
        PointEstimate {
            estimand,
            estimator,
            value: mu1 - mu0,
            mu1,
            mu0,
        }
    }
}

fn weighted_sum<T: Scalar>(w: &Array1<T>, x: ArrayView1<'_, T>) -> T {
    w.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum()
}

/// Normalized weighting estimator `Σ (w₁ − w₀) Y`.
pub fn hajek_wate<T: Scalar>(weights: &WeightSet<T>, y: ArrayView1<'_, T>) -> PointEstimate<T> {
    let mu1 = weighted_sum(&weights.w1, y);
    let mu0 = weighted_sum(&weights.w0, y);
    PointEstimate::new(weights.estimand, EstimatorKind::Weighting, mu1, mu0)
}

fn require_att_atc(estimand: Estimand) -> Result<()> {
    if estimand == Estimand::Ate {
        return Err(Error::Unsupported(
            "regression and doubly robust estimators cover ATT and ATC only".into(),
        ));
    }
    Ok(())
}

/// Imputation estimator. `m_opposite` is m̂₀ for ATT and m̂₁ for ATC, at every unit.
pub fn regression_estimate<T: Scalar>(
    weights: &WeightSet<T>,
    y: ArrayView1<'_, T>,
    m_opposite: ArrayView1<'_, T>,
) -> Result<PointEstimate<T>> {
    require_att_atc(weights.estimand)?;
    let (mu1, mu0) = match weights.estimand {
        Estimand::Att => (
            weighted_sum(&weights.w1, y),
            weighted_sum(&weights.w1, m_opposite),
        ),
        _ => (
            weighted_sum(&weights.w0, m_opposite),
            weighted_sum(&weights.w0, y),
        ),
    };
    Ok(PointEstimate::new(
        weights.estimand,
        EstimatorKind::Regression,
        mu1,
        mu0,
    ))
}

/// Doubly robust estimator `Σ (w₁ − w₀)(Y − m̂)`.
///
/// The components are the bias-corrected means of the two potential outcomes
/// over the target arm: for ATT, `μ̂₁ = Σ w₁Y` and
/// `μ̂₀ = Σ w₁m̂₀ + Σ w₀(Y − m̂₀)`; ATC mirrors this with m̂₁.
pub fn dr_estimate<T: Scalar>(
    weights: &WeightSet<T>,
    y: ArrayView1<'_, T>,
    m_opposite: ArrayView1<'_, T>,
) -> Result<PointEstimate<T>> {
    require_att_atc(weights.estimand)?;
    let resid: Array1<T> = &y - &m_opposite;
    let (mu1, mu0) = match weights.estimand {
        Estimand::Att => (
            weighted_sum(&weights.w1, y),
            weighted_sum(&weights.w1, m_opposite) + weighted_sum(&weights.w0, resid.view()),
        ),
        _ => (
            weighted_sum(&weights.w0, m_opposite) + weighted_sum(&weights.w1, resid.view()),
            weighted_sum(&weights.w0, y),
        ),
    };
    Ok(PointEstimate::new(
        weights.estimand,
        EstimatorKind::DoublyRobust,
        mu1,
        mu0,
    ))
}
