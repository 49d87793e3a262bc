//! M-estimation sandwich variance `Σ̂ = A⁻¹ B A⁻ᵀ` for the stacked
//! estimating equations of the weighting estimator and of the doubly robust
//! ATT/ATC.
//!
//! Each system exposes `psi(θ)` at an arbitrary parameter so the closed-form
//! `A` can be checked against a numerical Jacobian.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::fit::{logistic, Arm, OrFit, PsFit};
use crate::inference::Inference;
use crate::linalg::{condition_number, equilibrate, weighted_gram, PivotedQr};
use crate::scalar::Scalar;
use crate::weights::{compute_weights, selection_g, Estimand, WeightSet};

/// Largest condition estimate of the equilibrated `A` that is still inverted.
pub const MAX_A_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Beta,
    Alpha,
    Mu1,
    Mu0,
}

/// Stacked parameter `θ̂` with its block layout and the contrast `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaStack<T> {
    pub layout: Vec<(Block, usize)>,
    pub values: Array1<T>,
    pub contrast: Array1<T>,
}

impl<T: Scalar> ThetaStack<T> {
    fn new(layout: Vec<(Block, usize)>, values: Array1<T>) -> Self {
        let d = values.len();
        debug_assert_eq!(layout.iter().map(|b| b.1).sum::<usize>(), d);
        let mut contrast = Array1::zeros(d);
        contrast[d - 2] = T::one();
        contrast[d - 1] = -T::one();
        ThetaStack {
            layout,
            values,
            contrast,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `c'θ̂`.
    pub fn estimate(&self) -> T {
        self.contrast.dot(&self.values)
    }
}

/// A system `Σ_i Ψ(O_i; θ) = 0` whose solution carries the effect in its last two entries.
pub trait EstimatingEquations<T: Scalar> {
    fn n(&self) -> usize;
    fn theta_hat(&self) -> ThetaStack<T>;
    /// Per-unit estimating functions at `theta`, one row per unit.
    fn psi(&self, theta: ArrayView1<'_, T>) -> Array2<T>;
    /// `A_N(θ̂) = −N⁻¹ Σ ∂Ψ/∂θ'` from the analytic block formulas.
    fn closed_form_a(&self) -> Array2<T>;
}

fn check_lengths<T: Scalar>(v: &DesignMatrix<T>, z: &[bool], y: ArrayView1<'_, T>) -> Result<()> {
    if z.len() != v.nrows() || y.len() != v.nrows() {
        return Err(Error::InvalidInput(
            "data length does not match the propensity design".into(),
        ));
    }
    Ok(())
}

fn zf<T: Scalar>(z: &[bool]) -> Array1<T> {
    z.iter()
        .map(|&t| if t { T::one() } else { T::zero() })
        .collect()
}

/// `Σ_i c_i x_i'` over the rows of `x`, as a vector.
fn weighted_colsum<T: Scalar>(x: &Array2<T>, c: &Array1<T>) -> Array1<T> {
    x.t().dot(c)
}

/// Equations for the normalized weighting estimator with a general `g`.
#[derive(Debug, Clone)]
pub struct WateEquations<'a, T> {
    v: &'a DesignMatrix<T>,
    z: &'a [bool],
    y: ArrayView1<'a, T>,
    estimand: Estimand,
    beta_hat: Array1<T>,
    weights: WeightSet<T>,
}

impl<'a, T: Scalar> WateEquations<'a, T> {
    pub fn new(
        v: &'a DesignMatrix<T>,
        z: &'a [bool],
        y: ArrayView1<'a, T>,
        estimand: Estimand,
        ps: &PsFit<T>,
    ) -> Result<Self> {
        check_lengths(v, z, y)?;
        let weights = compute_weights(estimand, z, ps.fitted.view())?;
        Ok(WateEquations {
            v,
            z,
            y,
            estimand,
            beta_hat: ps.beta.clone(),
            weights,
        })
    }

    fn tilts_at(&self, beta: ArrayView1<'_, T>) -> (Array1<T>, Array1<T>, Array1<T>) {
        let e = self.v.values().dot(&beta).mapv(logistic);
        let sel = selection_g(self.estimand, e.view());
        let one = T::one();
        let mut t1 = Array1::zeros(e.len());
        let mut t0 = Array1::zeros(e.len());
        for i in 0..e.len() {
            if self.z[i] {
                t1[i] = sel.g[i] / e[i];
            } else {
                t0[i] = sel.g[i] / (one - e[i]);
            }
        }
        (e, t1, t0)
    }
}

impl<T: Scalar> EstimatingEquations<T> for WateEquations<'_, T> {
    fn n(&self) -> usize {
        self.z.len()
    }

    fn theta_hat(&self) -> ThetaStack<T> {
        let p = self.beta_hat.len();
        let mut values = Array1::zeros(p + 2);
        values.slice_mut(s![..p]).assign(&self.beta_hat);
        values[p] = self.weights.w1.dot(&self.y);
        values[p + 1] = self.weights.w0.dot(&self.y);
        ThetaStack::new(
            vec![(Block::Beta, p), (Block::Mu1, 1), (Block::Mu0, 1)],
            values,
        )
    }

    fn psi(&self, theta: ArrayView1<'_, T>) -> Array2<T> {
        let p = self.v.ncols();
        let (mu1, mu0) = (theta[p], theta[p + 1]);
        let (e, t1, t0) = self.tilts_at(theta.slice(s![..p]));
        let z = zf::<T>(self.z);
        let mut out = Array2::zeros((self.n(), p + 2));
        let score = self.v.values() * &(&z - &e).insert_axis(Axis(1));
        out.slice_mut(s![.., ..p]).assign(&score);
        for i in 0..self.n() {
            out[(i, p)] = t1[i] * (self.y[i] - mu1);
            out[(i, p + 1)] = t0[i] * (self.y[i] - mu0);
        }
        out
    }

    fn closed_form_a(&self) -> Array2<T> {
        let theta = self.theta_hat();
        let p = self.v.ncols();
        let n = T::from_count(self.n());
        let (mu1, mu0) = (theta.values[p], theta.values[p + 1]);
        let vals = self.v.values();
        let e = vals.dot(&self.beta_hat).mapv(logistic);
        let sel = selection_g(self.estimand, e.view());
        let one = T::one();
        let mut a = Array2::zeros((p + 2, p + 2));

        let a11 = weighted_gram(vals.view(), e.mapv(|x| x * (one - x)).view());
        a.slice_mut(s![..p, ..p]).assign(&(a11 / n));

        // ∂g/∂β = f_i V_i', so each bracket collapses to a scalar times V_i'.
        let mut c21 = Array1::zeros(self.n());
        let mut c31 = Array1::zeros(self.n());
        let (mut a22, mut a33) = (T::zero(), T::zero());
        for i in 0..self.n() {
            let (ei, gi, fi) = (e[i], sel.g[i], sel.dg_factor[i]);
            if self.z[i] {
                c21[i] = -(fi - (one - ei) * gi) / ei * (self.y[i] - mu1);
                a22 = a22 + gi / ei;
            } else {
                c31[i] = -(fi + ei * gi) / (one - ei) * (self.y[i] - mu0);
                a33 = a33 + gi / (one - ei);
            }
        }
        a.slice_mut(s![p, ..p])
            .assign(&(weighted_colsum(vals, &c21) / n));
        a.slice_mut(s![p + 1, ..p])
            .assign(&(weighted_colsum(vals, &c31) / n));
        a[(p, p)] = a22 / n;
        a[(p + 1, p + 1)] = a33 / n;
        a
    }
}

/// Equations for the doubly robust ATT (with α₀) or ATC (with α₁).
#[derive(Debug, Clone)]
pub struct DrEquations<'a, T> {
    v: &'a DesignMatrix<T>,
    w: &'a DesignMatrix<T>,
    z: &'a [bool],
    y: ArrayView1<'a, T>,
    estimand: Estimand,
    beta_hat: Array1<T>,
    alpha_hat: Array1<T>,
    weights: WeightSet<T>,
    m_hat: Array1<T>,
}

impl<'a, T: Scalar> DrEquations<'a, T> {
    /// `or_fit` must be the opposite-arm model: control arm for ATT, treated arm for ATC.
    pub fn new(
        v: &'a DesignMatrix<T>,
        w: &'a DesignMatrix<T>,
        z: &'a [bool],
        y: ArrayView1<'a, T>,
        estimand: Estimand,
        ps: &PsFit<T>,
        or_fit: &OrFit<T>,
    ) -> Result<Self> {
        check_lengths(v, z, y)?;
        if w.nrows() != v.nrows() {
            return Err(Error::InvalidInput("outcome design length mismatch".into()));
        }
        let expected_arm = match estimand {
            Estimand::Att => Arm::Control,
            Estimand::Atc => Arm::Treated,
            Estimand::Ate => {
                return Err(Error::Unsupported(
                    "doubly robust sandwich covers ATT and ATC".into(),
                ))
            }
        };
        if or_fit.arm != expected_arm {
            return Err(Error::InvalidInput(format!(
                "{estimand} needs the outcome model of the {expected_arm:?} arm"
            )));
        }
        let weights = compute_weights(estimand, z, ps.fitted.view())?;
        Ok(DrEquations {
            v,
            w,
            z,
            y,
            estimand,
            beta_hat: ps.beta.clone(),
            alpha_hat: or_fit.alpha.clone(),
            weights,
            m_hat: or_fit.fitted_all.clone(),
        })
    }

    fn dims(&self) -> (usize, usize) {
        (self.v.ncols(), self.w.ncols())
    }

    /// Arm whose units enter the outcome-model score.
    fn or_arm_has(&self, treated: bool) -> bool {
        match self.estimand {
            Estimand::Att => !treated,
            _ => treated,
        }
    }
}

impl<T: Scalar> EstimatingEquations<T> for DrEquations<'_, T> {
    fn n(&self) -> usize {
        self.z.len()
    }

    fn theta_hat(&self) -> ThetaStack<T> {
        let (p, q) = self.dims();
        let resid = &self.y - &self.m_hat;
        let mut values = Array1::zeros(p + q + 2);
        values.slice_mut(s![..p]).assign(&self.beta_hat);
        values.slice_mut(s![p..p + q]).assign(&self.alpha_hat);
        values[p + q] = self.weights.w1.dot(&resid);
        values[p + q + 1] = self.weights.w0.dot(&resid);
        ThetaStack::new(
            vec![
                (Block::Beta, p),
                (Block::Alpha, q),
                (Block::Mu1, 1),
                (Block::Mu0, 1),
            ],
            values,
        )
    }

    fn psi(&self, theta: ArrayView1<'_, T>) -> Array2<T> {
        let (p, q) = self.dims();
        let beta = theta.slice(s![..p]);
        let alpha = theta.slice(s![p..p + q]);
        let (mu1, mu0) = (theta[p + q], theta[p + q + 1]);
        let e = self.v.values().dot(&beta).mapv(logistic);
        let m = self.w.values().dot(&alpha);
        let one = T::one();
        let mut out = Array2::zeros((self.n(), p + q + 2));
        for i in 0..self.n() {
            let treated = self.z[i];
            let zi = if treated { one } else { T::zero() };
            let r = self.y[i] - m[i];
            out.slice_mut(s![i, ..p])
                .assign(&(&self.v.row(i) * (zi - e[i])));
            if self.or_arm_has(treated) {
                out.slice_mut(s![i, p..p + q]).assign(&(&self.w.row(i) * r));
            }
            let (m1_row, m0_row) = match (self.estimand, treated) {
                (Estimand::Att, true) => (r - mu1, T::zero()),
                (Estimand::Att, false) => (T::zero(), e[i] / (one - e[i]) * (r - mu0)),
                (_, true) => ((one - e[i]) / e[i] * (r - mu1), T::zero()),
                (_, false) => (T::zero(), r - mu0),
            };
            out[(i, p + q)] = m1_row;
            out[(i, p + q + 1)] = m0_row;
        }
        out
    }

    fn closed_form_a(&self) -> Array2<T> {
        let (p, q) = self.dims();
        let theta = self.theta_hat();
        let (mu1, mu0) = (theta.values[p + q], theta.values[p + q + 1]);
        let n_units = self.n();
        let n = T::from_count(n_units);
        let one = T::one();
        let vals = self.v.values();
        let wv = self.w.values();
        let e = vals.dot(&self.beta_hat).mapv(logistic);
        let z = zf::<T>(self.z);
        let resid = &self.y - &self.m_hat;
        let mut a = Array2::zeros((p + q + 2, p + q + 2));

        let a11 = weighted_gram(vals.view(), e.mapv(|x| x * (one - x)).view());
        a.slice_mut(s![..p, ..p]).assign(&(a11 / n));
        let arm: Array1<T> = self
            .z
            .iter()
            .map(|&t| if self.or_arm_has(t) { one } else { T::zero() })
            .collect();
        a.slice_mut(s![p..p + q, p..p + q])
            .assign(&(weighted_gram(wv.view(), arm.view()) / n));

        let (r1, r0) = (p + q, p + q + 1);
        match self.estimand {
            Estimand::Att => {
                let odds: Array1<T> = (0..n_units)
                    .map(|i| {
                        if self.z[i] {
                            T::zero()
                        } else {
                            e[i] / (one - e[i])
                        }
                    })
                    .collect();
                a.slice_mut(s![r1, p..p + q])
                    .assign(&(weighted_colsum(wv, &z) / n));
                a[(r1, r1)] = z.sum() / n;
                let c41: Array1<T> = (0..n_units).map(|i| -odds[i] * (resid[i] - mu0)).collect();
                a.slice_mut(s![r0, ..p])
                    .assign(&(weighted_colsum(vals, &c41) / n));
                a.slice_mut(s![r0, p..p + q])
                    .assign(&(weighted_colsum(wv, &odds) / n));
                a[(r0, r0)] = odds.sum() / n;
            }
            _ => {
                let inv_odds: Array1<T> = (0..n_units)
                    .map(|i| {
                        if self.z[i] {
                            (one - e[i]) / e[i]
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                let c31: Array1<T> = (0..n_units)
                    .map(|i| inv_odds[i] * (resid[i] - mu1))
                    .collect();
                a.slice_mut(s![r1, ..p])
                    .assign(&(weighted_colsum(vals, &c31) / n));
                a.slice_mut(s![r1, p..p + q])
                    .assign(&(weighted_colsum(wv, &inv_odds) / n));
                a[(r1, r1)] = inv_odds.sum() / n;
                let control = z.mapv(|x| one - x);
                a.slice_mut(s![r0, p..p + q])
                    .assign(&(weighted_colsum(wv, &control) / n));
                a[(r0, r0)] = control.sum() / n;
            }
        }
        a
    }
}

/// `Ψ` at `θ̂`: rows are units, columns follow the `ThetaStack` layout.
pub fn stack_psi<T: Scalar, E: EstimatingEquations<T>>(eqs: &E) -> Array2<T> {
    eqs.psi(eqs.theta_hat().values.view())
}

/// `B_N = N⁻¹ Ψ'Ψ`.
pub fn assemble_b<T: Scalar>(psi: &Array2<T>) -> Array2<T> {
    let n = T::from_count(psi.nrows().max(1));
    psi.t().dot(psi) / n
}

/// Ingredients of the sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichParts<T> {
    pub psi: Array2<T>,
    pub a: Array2<T>,
    pub b: Array2<T>,
    pub sigma: Array2<T>,
}

/// Variance of `c'θ̂` and the resulting normal inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichSe<T> {
    pub variance: T,
    pub inference: Inference<T>,
}

fn check_condition<T: Scalar>(a: &Array2<T>) -> Result<()> {
    let cond = condition_number(equilibrate(a.view()).view());
    if !(cond <= T::lit(MAX_A_CONDITION)) {
        return Err(Error::SingularA {
            condition: cond.as_f64(),
        });
    }
    Ok(())
}

/// `Σ̂ = A⁻¹ B A⁻ᵀ`.
pub fn sandwich_sigma<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> Result<Array2<T>> {
    check_condition(a)?;
    let qr = PivotedQr::new(a.view());
    let a_inv_b = qr.solve_matrix(b.view());
    // A⁻¹ (A⁻¹ B)' = A⁻¹ B' A⁻ᵀ, and B is symmetric.
    let sigma_t = qr.solve_matrix(a_inv_b.t());
    Ok(sigma_t.t().to_owned())
}

/// `Var(τ̂) = N⁻¹ c' A⁻¹ B A⁻ᵀ c` with a normal interval at level `alpha`.
pub fn sandwich_se<T: Scalar>(
    a: &Array2<T>,
    b: &Array2<T>,
    contrast: ArrayView1<'_, T>,
    n: usize,
    estimate: T,
    alpha: f64,
) -> Result<SandwichSe<T>> {
    check_condition(a)?;
    // u = A⁻ᵀ c, so c'A⁻¹BA⁻ᵀc = u'Bu.
    let u = PivotedQr::new(a.t()).solve(contrast);
    let variance = u.dot(&b.dot(&u)) / T::from_count(n);
    if !variance.is_finite() {
        return Err(Error::SingularA {
            condition: f64::INFINITY,
        });
    }
    if variance < T::zero() {
        return Err(Error::NegativeVariance {
            variance: variance.as_f64(),
        });
    }
    Ok(SandwichSe {
        variance,
        inference: Inference::normal(estimate, variance.sqrt(), alpha),
    })
}

/// Full sandwich for a system: parts plus the effect's standard error.
pub fn sandwich<T: Scalar, E: EstimatingEquations<T>>(
    eqs: &E,
    alpha: f64,
) -> Result<(SandwichParts<T>, SandwichSe<T>)> {
    let theta = eqs.theta_hat();
    let psi = eqs.psi(theta.values.view());
    let a = eqs.closed_form_a();
    let b = assemble_b(&psi);
    let se = sandwich_se(
        &a,
        &b,
        theta.contrast.view(),
        eqs.n(),
        theta.estimate(),
        alpha,
    )?;
    let sigma = sandwich_sigma(&a, &b)?;
    Ok((SandwichParts { psi, a, b, sigma }, se))
}
