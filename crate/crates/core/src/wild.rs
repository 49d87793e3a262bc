//! Efficient influence functions for ATT/ATC and the wild (multiplier)
//! bootstrap built on them.
//!
//! Each replicate perturbs the estimated influence values with i.i.d.
//! multipliers, `Δ(r) = N^{-1/2} Σ ξ_i φ̂_i`, and the spread of `Δ` across
//! replicates gives the standard error.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Inference;
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use crate::weights::Estimand;

/// Interquartile range of the standard normal, `z_0.75 − z_0.25`.
pub const NORMAL_IQR: f64 = 1.3489795;

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVector<T> {
    pub phi: Array1<T>,
    pub estimand: Estimand,
    /// Sample treated proportion `N₁/N`.
    pub p_hat: T,
    pub centered: bool,
    /// Mean of the values before centering.
    pub raw_mean: T,
}

impl<T: Scalar> InfluenceVector<T> {
    /// Wraps given values as-is (no centering).
    pub fn from_values(phi: Array1<T>, estimand: Estimand, p_hat: T) -> Self {
        let raw_mean = mean(phi.view());
        InfluenceVector {
            phi,
            estimand,
            p_hat,
            centered: false,
            raw_mean,
        }
    }

    pub fn centered(mut self) -> Self {
        if !self.centered {
            let m = mean(self.phi.view());
            self.phi.mapv_inplace(|x| x - m);
            self.centered = true;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Multiplies every value by `k`.
    pub fn scaled(mut self, k: T) -> Self {
        self.phi.mapv_inplace(|x| x * k);
        self.raw_mean = self.raw_mean * k;
        self
    }
}

fn mean<T: Scalar>(x: ArrayView1<'_, T>) -> T {
    if x.is_empty() {
        return T::zero();
    }
    x.sum() / T::from_count(x.len())
}

/// Uncentered plug-in influence values:
/// ATT `p⁻¹[(Z−e)/(1−e)(Y−m₀) − Zτ]`, ATC `(1−p)⁻¹[(Z−e)/e(Y−m₁) − (1−Z)τ]`.
pub fn efficient_influence_raw<T: Scalar>(
    estimand: Estimand,
    treatment: &[bool],
    y: ArrayView1<'_, T>,
    e_hat: ArrayView1<'_, T>,
    m_opposite: ArrayView1<'_, T>,
    tau_hat: T,
) -> Result<InfluenceVector<T>> {
    let n = treatment.len();
    if y.len() != n || e_hat.len() != n || m_opposite.len() != n {
        return Err(Error::InvalidInput(
            "influence inputs have different lengths".into(),
        ));
    }
    let n1 = treatment.iter().filter(|&&t| t).count();
    if n1 == 0 {
        return Err(Error::EmptyArm { arm: 1 });
    }
    if n1 == n {
        return Err(Error::EmptyArm { arm: 0 });
    }
    let one = T::one();
    let p_hat = T::from_count(n1) / T::from_count(n);
    let mut phi = Array1::zeros(n);
    for i in 0..n {
        let e = e_hat[i];
        let zi = if treatment[i] { one } else { T::zero() };
        let r = y[i] - m_opposite[i];
        phi[i] = match estimand {
            Estimand::Att => {
                if !(e < one) {
                    return Err(Error::PositivityViolation {
                        unit: i,
                        value: e.as_f64(),
                    });
                }
                ((zi - e) / (one - e) * r - zi * tau_hat) / p_hat
            }
            Estimand::Atc => {
                if !(e > T::zero()) {
                    return Err(Error::PositivityViolation {
                        unit: i,
                        value: e.as_f64(),
                    });
                }
                ((zi - e) / e * r - (one - zi) * tau_hat) / (one - p_hat)
            }
            Estimand::Ate => {
                return Err(Error::Unsupported(
                    "wild bootstrap covers ATT and ATC".into(),
                ));
            }
        };
    }
    Ok(InfluenceVector::from_values(phi, estimand, p_hat))
}

/// Mean-centered influence values, the form the bootstrap perturbs.
pub fn efficient_influence<T: Scalar>(
    estimand: Estimand,
    treatment: &[bool],
    y: ArrayView1<'_, T>,
    e_hat: ArrayView1<'_, T>,
    m_opposite: ArrayView1<'_, T>,
    tau_hat: T,
) -> Result<InfluenceVector<T>> {
    Ok(efficient_influence_raw(estimand, treatment, y, e_hat, m_opposite, tau_hat)?.centered())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// ±1 with probability ½ each.
    Rademacher,
    /// Standard exponential: mean 1, variance 1.
    Exponential,
}

impl Multiplier {
    pub fn draw<T: Scalar, R: Rng + ?Sized>(self, rng: &mut R) -> T {
        match self {
            Multiplier::Rademacher => {
                if rng.random::<bool>() {
                    T::one()
                } else {
                    -T::one()
                }
            }
            Multiplier::Exponential => T::lit(Exp1.sample(rng)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Multiplier::Rademacher => "rademacher",
            Multiplier::Exponential => "exponential",
        }
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Multiplier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" | "r" => Ok(Multiplier::Rademacher),
            "exponential" | "e" | "exp" => Ok(Multiplier::Exponential),
            other => Err(Error::InvalidInput(format!("unknown multiplier `{other}`"))),
        }
    }
}

/// Replicates of `Δ(r) = √N(τ̂*(r) − τ̂)` and `τ̂*(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WildDraws<T> {
    pub deltas: Vec<T>,
    pub tau_star: Vec<T>,
    pub multiplier: Multiplier,
    pub replicates: usize,
    pub n: usize,
    pub seed: SeedStream,
}

pub fn wild_bootstrap<T: Scalar>(
    phi: &InfluenceVector<T>,
    tau_hat: T,
    replicates: usize,
    multiplier: Multiplier,
    seed: SeedStream,
) -> WildDraws<T> {
    let n = phi.len();
    let root_n = T::from_count(n).sqrt();
    let deltas: Vec<T> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.rng(r as u64);
            let mut acc = T::zero();
            match multiplier {
                // One random bit per sign.
                Multiplier::Rademacher => {
                    for chunk in phi.phi.as_slice().expect("contiguous").chunks(64) {
                        let mut bits: u64 = rng.random();
                        for &p in chunk {
                            // Branch-free: the sign bit is unpredictable by construction.
                            acc = acc + p * T::lit((bits & 1) as f64 * 2.0 - 1.0);
                            bits >>= 1;
                        }
                    }
                }
                Multiplier::Exponential => {
                    for &p in phi.phi.iter() {
                        let xi: T = multiplier.draw(&mut rng);
                        acc = acc + xi * p;
                    }
                }
            }
            acc / root_n
        })
        .collect();
    let tau_star = deltas.iter().map(|&d| tau_hat + d / root_n).collect();
    WildDraws {
        deltas,
        tau_star,
        multiplier,
        replicates,
        n,
        seed,
    }
}

/// Sample quantile with linear interpolation between order statistics (type 7).
pub fn quantile<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WildSe<T> {
    /// `IQR(Δ) / 1.3489795`.
    pub sigma_iqr: T,
    /// `sigma_iqr / √N`.
    pub se: T,
    /// `R⁻¹ Σ Δ(r)²`.
    pub sigma_star: T,
    /// `√(sigma_star / N)`.
    pub se_direct: T,
}

pub fn iqr_se<T: Scalar>(draws: &WildDraws<T>) -> Result<WildSe<T>> {
    if draws.deltas.len() < 2 {
        return Err(Error::DegenerateDraws(
            "need at least two replicates".into(),
        ));
    }
    if draws.deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::DegenerateDraws("non-finite replicate".into()));
    }
    let mut sorted = draws.deltas.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let constant = sorted.first() == sorted.last();
    if iqr == T::zero() && !constant {
        return Err(Error::DegenerateDraws("interquartile range is zero".into()));
    }
    let root_n = T::from_count(draws.n).sqrt();
    let sigma_iqr = iqr / T::lit(NORMAL_IQR);
    let sigma_star =
        draws.deltas.iter().map(|&d| d * d).sum::<T>() / T::from_count(draws.deltas.len());
    Ok(WildSe {
        sigma_iqr,
        se: sigma_iqr / root_n,
        sigma_star,
        se_direct: (sigma_star / T::from_count(draws.n)).sqrt(),
    })
}

/// `τ̂ ± z_{1−α/2} N^{-1/2} Σ̂^{1/2}`.
pub fn wild_ci<T: Scalar>(tau_hat: T, se: T, alpha: f64) -> Inference<T> {
    Inference::normal(tau_hat, se, alpha)
}

/// `2τ̂ − mean(τ̂*)` with the same standard error.
pub fn bias_corrected<T: Scalar>(tau_hat: T, tau_star: &[T], se: T, alpha: f64) -> Inference<T> {
    let mean_star = if tau_star.is_empty() {
        tau_hat
    } else {
        tau_star.iter().copied().sum::<T>() / T::from_count(tau_star.len())
    };
    Inference::normal(T::lit(2.0) * tau_hat - mean_star, se, alpha)
}
