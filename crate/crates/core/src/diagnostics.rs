//! Weighting diagnostics: effective sample size, design effect, variance
//! inflation and standardized mean differences.

use ndarray::{ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::weights::{Estimand, WeightSet};

/// Kish effective sample size `(Σw)² / Σw²` over the units of one arm.
pub fn ess_of<T: Scalar>(w: ArrayView1<'_, T>, treatment: &[bool], arm_treated: bool) -> T {
    let (mut s, mut s2) = (T::zero(), T::zero());
    for (&wi, &t) in w.iter().zip(treatment) {
        if t == arm_treated {
            s = s + wi;
            s2 = s2 + wi * wi;
        }
    }
    if s2 == T::zero() {
        return T::zero();
    }
    s * s / s2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EssReport<T> {
    pub estimand: Estimand,
    pub n_treated: usize,
    pub n_control: usize,
    pub ess_treated: T,
    pub ess_control: T,
    /// ESS of the reweighted arm (control for ATT, treated for ATC, all for ATE).
    pub ess: T,
    /// ATT: ESS/N₁; ATC: ESS/N₀; ATE: ESS/N.
    pub design_effect: T,
}

pub fn effective_sample_size<T: Scalar>(
    weights: &WeightSet<T>,
    treatment: &[bool],
) -> EssReport<T> {
    let n1 = treatment.iter().filter(|&&t| t).count();
    let n0 = treatment.len() - n1;
    // ESS is scale free; raw tilts keep the uniform case exact.
    let ess_treated = ess_of(weights.tilt1.view(), treatment, true);
    let ess_control = ess_of(weights.tilt0.view(), treatment, false);
    let (ess, denom) = match weights.estimand {
        Estimand::Att => (ess_control, n1),
        Estimand::Atc => (ess_treated, n0),
        Estimand::Ate => {
            // Combined weights w₁ + w₀ over the whole sample.
            let s2: T = weights
                .w1
                .iter()
                .chain(weights.w0.iter())
                .map(|&w| w * w)
                .sum();
            let s: T = weights.w1.sum() + weights.w0.sum();
            (s * s / s2, n1 + n0)
        }
    };
    EssReport {
        estimand: weights.estimand,
        n_treated: n1,
        n_control: n0,
        ess_treated,
        ess_control,
        ess,
        design_effect: ess / T::from_count(denom),
    }
}

/// `(N₁N₀/N) Σ_z (Σ w_z)⁻² Σ w_z²`.
pub fn variance_inflation<T: Scalar>(weights: &WeightSet<T>, treatment: &[bool]) -> T {
    let n1 = treatment.iter().filter(|&&t| t).count();
    let n0 = treatment.len() - n1;
    let term = |w: ArrayView1<'_, T>, arm: bool| {
        let (mut s, mut s2) = (T::zero(), T::zero());
        for (&wi, &t) in w.iter().zip(treatment) {
            if t == arm {
                s = s + wi;
                s2 = s2 + wi * wi;
            }
        }
        s2 / (s * s)
    };
    let lead = T::from_count(n1) * T::from_count(n0) / T::from_count(n1 + n0);
    lead * (term(weights.w1.view(), true) + term(weights.w0.view(), false))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmdRow<T> {
    pub covariate: String,
    pub unweighted: T,
    /// Absent when no weights were supplied.
    pub weighted: Option<T>,
    /// Balance threshold exceeded (weighted value if present, else unweighted).
    pub imbalanced: bool,
}

pub const SMD_THRESHOLD: f64 = 0.1;

fn arm_moments<T: Scalar>(x: ArrayView1<'_, T>, treatment: &[bool], arm: bool) -> (T, T) {
    let vals: Vec<T> = x
        .iter()
        .zip(treatment)
        .filter(|(_, &t)| t == arm)
        .map(|(&v, _)| v)
        .collect();
    let n = T::from_count(vals.len());
    let mean = vals.iter().copied().sum::<T>() / n;
    if vals.len() < 2 {
        return (mean, T::zero());
    }
    let ss: T = vals.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - T::one()))
}

/// |mean difference| over the pooled unweighted SD `√((s₁² + s₀²)/2)`.
pub fn standardized_differences<T: Scalar>(
    x: ArrayView2<'_, T>,
    names: &[String],
    treatment: &[bool],
    weights: Option<&WeightSet<T>>,
) -> Result<Vec<SmdRow<T>>> {
    if x.ncols() != names.len() || x.nrows() != treatment.len() {
        return Err(Error::InvalidInput(
            "covariate matrix does not match names or treatment".into(),
        ));
    }
    let two = T::lit(2.0);
    let mut rows = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let col = x.column(j);
        let (m1, v1) = arm_moments(col, treatment, true);
        let (m0, v0) = arm_moments(col, treatment, false);
        let sd = ((v1 + v0) / two).sqrt();
        if !(sd > T::zero()) {
            return Err(Error::ZeroPooledSd(name.clone()));
        }
        let unweighted = (m1 - m0).abs() / sd;
        let weighted = weights.map(|w| {
            let wm1: T = w.w1.iter().zip(col.iter()).map(|(&a, &b)| a * b).sum();
            let wm0: T = w.w0.iter().zip(col.iter()).map(|(&a, &b)| a * b).sum();
            (wm1 - wm0).abs() / sd
        });
        let shown = weighted.unwrap_or(unweighted);
        rows.push(SmdRow {
            covariate: name.clone(),
            unweighted,
            weighted,
            imbalanced: shown > T::lit(SMD_THRESHOLD),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport<T> {
    pub ess: EssReport<T>,
    pub variance_inflation: T,
    pub smd: Vec<SmdRow<T>>,
}

pub fn diagnose<T: Scalar>(
    weights: &WeightSet<T>,
    treatment: &[bool],
    x: ArrayView2<'_, T>,
    names: &[String],
) -> Result<DiagnosticsReport<T>> {
    Ok(DiagnosticsReport {
        ess: effective_sample_size(weights, treatment),
        variance_inflation: variance_inflation(weights, treatment),
        smd: standardized_differences(x, names, treatment, Some(weights))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::compute_weights;
    use ndarray::{array, Array1};

    #[test]
    fn uniform_and_two_unit_ess() {
        let t = [true, true, true];
        assert!((ess_of(array![1.0f64, 1.0, 1.0].view(), &t, true) - 3.0).abs() < 1e-12);
        let ess = ess_of(array![0.9f64, 0.1].view(), &[false, false], false);
        assert!((ess - 1.0 / 0.82).abs() < 1e-12);
    }

    #[test]
    fn balanced_ate_vi_is_one() {
        let z = [true, false, true, false, true, false];
        let w = compute_weights(Estimand::Ate, &z, Array1::from_elem(6, 0.5f64).view()).unwrap();
        assert!((variance_inflation(&w, &z) - 1.0).abs() < 1e-12);
        let ess = effective_sample_size(&w, &z);
        assert!((ess.ess - 6.0).abs() < 1e-12 && (ess.design_effect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn att_treated_ess_is_arm_size() {
        let z = [true, false, true, false, false];
        let e = array![0.7f64, 0.2, 0.4, 0.6, 0.1];
        let w = compute_weights(Estimand::Att, &z, e.view()).unwrap();
        let ess = effective_sample_size(&w, &z);
        assert!((ess.ess_treated - 2.0).abs() < 1e-12);
        assert!(ess.ess_control < 3.0);
        assert!((ess.design_effect - ess.ess_control / 2.0).abs() < 1e-15);
    }

    #[test]
    fn smd_examples() {
        // Arm means 1 and 0, each arm variance 4 so the pooled SD is 2.
        let s = 2.0f64.sqrt();
        let x = array![[1.0 + s], [1.0 - s], [s], [-s]];
        let z = [true, true, false, false];
        let rows = standardized_differences(x.view(), &["a".to_string()], &z, None).unwrap();
        assert!((rows[0].unweighted - 0.5).abs() < 1e-12);
        assert!(rows[0].imbalanced);

        let x = array![[1.0f64], [1.0], [0.0], [0.0]];
        let z = [true, false, true, false];
        let rows = standardized_differences(x.view(), &["b".to_string()], &z, None).unwrap();
        assert_eq!(rows[0].unweighted, 0.0);

        let c = array![[5.0f64], [5.0], [5.0]];
        let err =
            standardized_differences(c.view(), &["c".to_string()], &[true, false, true], None);
        assert!(matches!(err, Err(Error::ZeroPooledSd(_))));
    }
}
