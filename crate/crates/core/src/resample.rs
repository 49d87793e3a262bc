//! Standard nonparametric bootstrap: resample rows with replacement, refit
//! both nuisance models and recompute the estimate.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, ModelSpec};
use crate::error::{Error, Result};
use crate::inference::Inference;
use crate::pipeline::{fit_bundle, point_estimate, Failure};
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use crate::weights::Estimand;

/// Successful replicate estimates of one estimand plus failure counts by error kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleDraws<T> {
    pub estimand: Estimand,
    pub estimates: Vec<T>,
    pub failures: BTreeMap<&'static str, usize>,
    pub requested: usize,
}

impl<T: Scalar> ResampleDraws<T> {
    pub fn n_failures(&self) -> usize {
        self.failures.values().sum()
    }
}

/// Row indices drawn uniformly with replacement.
pub fn resample_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bootstrap replicates of every estimand, sharing the refits across estimands.
/// Replicate `r` uses stream `r` of `seed`, so results do not depend on scheduling.
pub fn resample_estimates<T: Scalar>(
    data: &Dataset<T>,
    spec: &ModelSpec,
    estimands: &[Estimand],
    replicates: usize,
    seed: SeedStream,
) -> Vec<ResampleDraws<T>> {
    let per_rep: Vec<Vec<std::result::Result<T, Failure>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let idx = resample_indices(data.len(), &mut seed.rng(r as u64));
            let sample = data.select_rows(&idx);
            match fit_bundle(&sample, spec) {
                Err(f) => vec![Err(f); estimands.len()],
                Ok(bundle) => estimands
                    .iter()
                    .map(|&est| point_estimate(&sample, &bundle, est).map(|(p, _)| p.value))
                    .collect(),
            }
        })
        .collect();

    estimands
        .iter()
        .enumerate()
        .map(|(k, &estimand)| {
            let mut draws = ResampleDraws {
                estimand,
                estimates: Vec::new(),
                failures: BTreeMap::new(),
                requested: replicates,
            };
            for rep in &per_rep {
                match &rep[k] {
                    Ok(v) if v.is_finite() => draws.estimates.push(*v),
                    Ok(_) => *draws.failures.entry("NonFinite").or_default() += 1,
                    Err(f) => *draws.failures.entry(f.error.kind()).or_default() += 1,
                }
            }
            draws
        })
        .collect()
}

/// Sample SD of the successful replicates, with a normal interval around the original estimate.
pub fn bootstrap_se<T: Scalar>(
    draws: &ResampleDraws<T>,
    tau_hat: T,
    alpha: f64,
) -> Result<Inference<T>> {
    let ok = draws.estimates.len();
    if 2 * ok < draws.requested || ok < 2 {
        return Err(Error::TooManyFailures {
            failures: draws.n_failures(),
            requested: draws.requested,
        });
    }
    let n = T::from_count(ok);
    let mean = draws.estimates.iter().copied().sum::<T>() / n;
    let ss: T = draws
        .estimates
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum();
    let se = (ss / (n - T::one())).sqrt();
    Ok(Inference::normal(tau_hat, se, alpha))
}

/// Full standard bootstrap for one estimand.
pub fn standard_bootstrap<T: Scalar>(
    data: &Dataset<T>,
    spec: &ModelSpec,
    estimand: Estimand,
    tau_hat: T,
    replicates: usize,
    alpha: f64,
    seed: SeedStream,
) -> Result<(Inference<T>, ResampleDraws<T>)> {
    let draws = resample_estimates(data, spec, &[estimand], replicates, seed)
        .pop()
        .expect("one estimand");
    let inf = bootstrap_se(&draws, tau_hat, alpha)?;
    Ok((inf, draws))
}
