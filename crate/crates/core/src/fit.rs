//! Nuisance models: logistic propensity score by IRLS and per-arm linear
//! outcome regressions by least squares, plus their per-unit score matrices.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, equilibrate, weighted_gram, PivotedQr};
use crate::scalar::Scalar;

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn id(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn contains(self, treated: bool) -> bool {
        treated == (self == Arm::Treated)
    }

    pub fn opposite(self) -> Arm {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }
}

/// Numerically stable `1 / (1 + exp(-x))`.
pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let ex = x.exp();
        ex / (T::one() + ex)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions<T> {
    pub max_iterations: usize,
    /// Sup-norm tolerance on the score; scaled up automatically when the
    /// sample or covariate magnitudes make it unreachable in floating point.
    pub score_tolerance: T,
    /// Coefficients beyond this magnitude are taken as separation.
    pub coefficient_bound: T,
    /// Largest acceptable condition estimate of the equilibrated information matrix.
    pub max_condition: T,
}

impl<T: Scalar> Default for IrlsOptions<T> {
    fn default() -> Self {
        IrlsOptions {
            max_iterations: 100,
            score_tolerance: T::lit(1e-8),
            coefficient_bound: T::lit(30.0),
            max_condition: T::lit(1e12),
        }
    }
}

/// Fitted logistic propensity model.
#[derive(Debug, Clone, PartialEq)]
pub struct PsFit<T> {
    pub beta: Array1<T>,
    pub fitted: Array1<T>,
    pub converged: bool,
    pub iterations: usize,
    pub max_score_norm: T,
}

/// Linear outcome regression fitted on one arm, evaluated on every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrFit<T> {
    pub arm: Arm,
    pub alpha: Array1<T>,
    pub fitted_all: Array1<T>,
}

fn sup_norm<T: Scalar>(v: ArrayView1<'_, T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn bool_to_scalar<T: Scalar>(z: &[bool]) -> Array1<T> {
    z.iter()
        .map(|&t| if t { T::one() } else { T::zero() })
        .collect()
}

fn predict<T: Scalar>(v: &DesignMatrix<T>, beta: &Array1<T>) -> Array1<T> {
    v.values().dot(beta).mapv(logistic)
}

fn logistic_score_sum<T: Scalar>(v: &DesignMatrix<T>, z: &Array1<T>, e: &Array1<T>) -> Array1<T> {
    v.values().t().dot(&(z - e))
}

/// Tolerance actually enforced: the requested one, or the floating-point
/// floor of a score sum over this design, whichever is larger.
fn effective_tolerance<T: Scalar>(v: &DesignMatrix<T>, requested: T) -> T {
    let n = T::from_count(v.nrows());
    let scale = v
        .values()
        .axis_iter(Axis(1))
        .map(|c| c.iter().map(|x| x.abs()).sum::<T>() / n)
        .fold(T::one(), T::max);
    requested.max(T::epsilon() * n * scale * T::lit(10.0))
}

/// One Newton/IRLS update from `beta`. Exposed so the fixed point of a fit can be checked.
pub fn irls_step<T: Scalar>(
    v: &DesignMatrix<T>,
    z: &[bool],
    beta: &Array1<T>,
) -> Result<Array1<T>> {
    let zf = bool_to_scalar::<T>(z);
    let e = predict(v, beta);
    let info = weighted_gram(v.values().view(), e.mapv(|p| p * (T::one() - p)).view());
    let qr = PivotedQr::new(info.view());
    if !qr.is_full_rank() {
        return Err(Error::SingularInformation);
    }
    let step = qr.solve(logistic_score_sum(v, &zf, &e).view());
    Ok(beta + &step)
}

pub fn fit_logistic<T: Scalar>(v: &DesignMatrix<T>, z: &[bool]) -> Result<PsFit<T>> {
    fit_logistic_with(v, z, &IrlsOptions::default())
}

pub fn fit_logistic_with<T: Scalar>(
    v: &DesignMatrix<T>,
    z: &[bool],
    opts: &IrlsOptions<T>,
) -> Result<PsFit<T>> {
    if z.len() != v.nrows() {
        return Err(Error::InvalidInput(
            "treatment length does not match design".into(),
        ));
    }
    let n1 = z.iter().filter(|&&t| t).count();
    if n1 == 0 {
        return Err(Error::EmptyArm { arm: 1 });
    }
    if n1 == z.len() {
        return Err(Error::EmptyArm { arm: 0 });
    }
    let zf = bool_to_scalar::<T>(z);
    let tol = effective_tolerance(v, opts.score_tolerance);
    let mut beta = Array1::<T>::zeros(v.ncols());
    let mut converged_at = None;

    for iter in 1..=opts.max_iterations {
        beta = irls_step(v, z, &beta)?;
        if sup_norm(beta.view()) > opts.coefficient_bound {
            return Err(Error::NonConvergence {
                iterations: iter,
                reason: "coefficient diverging (separation)".into(),
            });
        }
        let e = predict(v, &beta);
        let score = logistic_score_sum(v, &zf, &e);
        if sup_norm(score.view()) <= tol {
            converged_at = Some(iter);
            break;
        }
    }
    let Some(mut iterations) = converged_at else {
        return Err(Error::NonConvergence {
            iterations: opts.max_iterations,
            reason: "iteration cap reached".into(),
        });
    };

    // One polishing step: Newton is quadratic here, so this lands at rounding level.
    if let Ok(polished) = irls_step(v, z, &beta) {
        let before = sup_norm(logistic_score_sum(v, &zf, &predict(v, &beta)).view());
        let after = sup_norm(logistic_score_sum(v, &zf, &predict(v, &polished)).view());
        if after <= before {
            beta = polished;
            iterations += 1;
        }
    }

    let fitted = predict(v, &beta);
    let info = weighted_gram(
        v.values().view(),
        fitted.mapv(|p| p * (T::one() - p)).view(),
    );
    let cond = condition_number(equilibrate(info.view()).view());
    if !(cond <= opts.max_condition) {
        return Err(Error::NonConvergence {
            iterations,
            reason: format!(
                "ill-conditioned information (condition {:e})",
                cond.as_f64()
            ),
        });
    }
    let max_score_norm = sup_norm(logistic_score_sum(v, &zf, &fitted).view());
    Ok(PsFit {
        beta,
        fitted,
        converged: true,
        iterations,
        max_score_norm,
    })
}

/// Least-squares fit of `y` on `w` using only the units in `arm`; predictions cover all units.
pub fn fit_ols<T: Scalar>(
    w: &DesignMatrix<T>,
    y: ArrayView1<'_, T>,
    treatment: &[bool],
    arm: Arm,
) -> Result<OrFit<T>> {
    if y.len() != w.nrows() || treatment.len() != w.nrows() {
        return Err(Error::InvalidInput(
            "outcome/treatment length does not match design".into(),
        ));
    }
    let idx: Vec<usize> = (0..treatment.len())
        .filter(|&i| arm.contains(treatment[i]))
        .collect();
    let cols = w.ncols();
    if idx.len() <= cols {
        return Err(Error::ArmTooSmall {
            arm: arm.id(),
            n: idx.len(),
            cols,
        });
    }
    let w_arm = w.values().select(Axis(0), &idx);
    let y_arm = y.select(Axis(0), &idx);
    let qr = PivotedQr::new(w_arm.view());
    let rank = qr.rank();
    if rank < cols {
        return Err(Error::RankDeficient {
            arm: arm.id(),
            rank,
            cols,
        });
    }
    let alpha = qr.solve(y_arm.view());
    let fitted_all = w.values().dot(&alpha);
    Ok(OrFit {
        arm,
        alpha,
        fitted_all,
    })
}

/// Per-unit logistic scores `[Z_i − ê_i] V_i`, one row per unit.
pub fn score_logistic<T: Scalar>(fit: &PsFit<T>, v: &DesignMatrix<T>, z: &[bool]) -> Array2<T> {
    let resid = &bool_to_scalar::<T>(z) - &fit.fitted;
    v.values() * &resid.insert_axis(Axis(1))
}

/// Per-unit least-squares scores `1{unit in arm} W_i (Y_i − W_i'α̂)`.
pub fn score_ols<T: Scalar>(
    fit: &OrFit<T>,
    w: &DesignMatrix<T>,
    y: ArrayView1<'_, T>,
    treatment: &[bool],
) -> Array2<T> {
    let resid: Array1<T> = (0..y.len())
        .map(|i| {
            if fit.arm.contains(treatment[i]) {
                y[i] - fit.fitted_all[i]
            } else {
                T::zero()
            }
        })
        .collect();
    w.values() * &resid.insert_axis(Axis(1))
}
