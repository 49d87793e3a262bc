//! End-to-end analysis of one dataset: fit the nuisance models, form the
//! point estimate for each estimand and attach every requested variance method.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DesignMatrix, ModelSpec};
use crate::diagnostics::{diagnose, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::fit::{fit_logistic, fit_ols, Arm, OrFit, PsFit};
use crate::inference::Inference;
use crate::resample::{bootstrap_se, resample_estimates};
use crate::rng::{tag, SeedStream};
use crate::sandwich::{sandwich, DrEquations, WateEquations};
use crate::scalar::Scalar;
use crate::weights::{
    compute_weights, dr_estimate, hajek_wate, Estimand, PointEstimate, WeightSet,
};
use crate::wild::{
    bias_corrected, efficient_influence, iqr_se, wild_bootstrap, wild_ci, Multiplier,
};

/// Where in the pipeline a replicate or method failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Propensity,
    Outcome,
    Weights,
    Variance,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::Propensity => "propensity",
            Stage::Outcome => "outcome",
            Stage::Weights => "weights",
            Stage::Variance => "variance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub stage: Stage,
    pub error: Error,
}

impl Failure {
    pub fn new(stage: Stage, error: Error) -> Self {
        Failure { stage, error }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage.as_str(), self.error)
    }
}

fn at(stage: Stage) -> impl FnOnce(Error) -> Failure {
    move |e| Failure::new(stage, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sandwich,
    WildRademacher,
    WildExponential,
    StandardBootstrap,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Sandwich,
        Method::WildRademacher,
        Method::WildExponential,
        Method::StandardBootstrap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sandwich => "sandwich",
            Method::WildRademacher => "wild_rademacher",
            Method::WildExponential => "wild_exponential",
            Method::StandardBootstrap => "standard_bootstrap",
        }
    }

    /// Short label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Sandwich => "Sandwich",
            Method::WildRademacher => "WB-R",
            Method::WildExponential => "WB-E",
            Method::StandardBootstrap => "Std.Boot",
        }
    }

    fn multiplier(self) -> Option<Multiplier> {
        match self {
            Method::WildRademacher => Some(Multiplier::Rademacher),
            Method::WildExponential => Some(Multiplier::Exponential),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '.'], "_");
        match key.as_str() {
            "sandwich" => Ok(Method::Sandwich),
            "wild_rademacher" | "wb_r" => Ok(Method::WildRademacher),
            "wild_exponential" | "wb_e" => Ok(Method::WildExponential),
            "standard_bootstrap" | "std_boot" | "bootstrap" => Ok(Method::StandardBootstrap),
            _ => Err(Error::InvalidInput(format!("unknown method `{s}`"))),
        }
    }
}

/// Fitted nuisance models for one dataset. Outcome fits are kept per arm so
/// that a failure on one arm only affects the estimand that needs it.
#[derive(Debug, Clone)]
pub struct FitBundle<T> {
    pub v: DesignMatrix<T>,
    pub w: DesignMatrix<T>,
    pub ps: PsFit<T>,
    pub or_control: std::result::Result<OrFit<T>, Error>,
    pub or_treated: std::result::Result<OrFit<T>, Error>,
}

impl<T: Scalar> FitBundle<T> {
    pub fn outcome_fit(&self, arm: Arm) -> std::result::Result<&OrFit<T>, Failure> {
        let fit = match arm {
            Arm::Control => &self.or_control,
            Arm::Treated => &self.or_treated,
        };
        fit.as_ref()
            .map_err(|e| Failure::new(Stage::Outcome, e.clone()))
    }
}

pub fn fit_bundle<T: Scalar>(
    data: &Dataset<T>,
    spec: &ModelSpec,
) -> std::result::Result<FitBundle<T>, Failure> {
    let v = data.design(&spec.ps_columns).map_err(at(Stage::Input))?;
    let w = data.design(&spec.or_columns).map_err(at(Stage::Input))?;
    let ps = fit_logistic(&v, data.treatment()).map_err(at(Stage::Propensity))?;
    let or_control = fit_ols(&w, data.outcome(), data.treatment(), Arm::Control);
    let or_treated = fit_ols(&w, data.outcome(), data.treatment(), Arm::Treated);
    Ok(FitBundle {
        v,
        w,
        ps,
        or_control,
        or_treated,
    })
}

/// Arm whose outcome model is imputed for an estimand (m̂₀ for ATT, m̂₁ for ATC).
pub fn imputed_arm(estimand: Estimand) -> Option<Arm> {
    match estimand {
        Estimand::Att => Some(Arm::Control),
        Estimand::Atc => Some(Arm::Treated),
        Estimand::Ate => None,
    }
}

/// Doubly robust estimate for ATT/ATC, normalized weighting estimate for ATE.
pub fn point_estimate<T: Scalar>(
    data: &Dataset<T>,
    bundle: &FitBundle<T>,
    estimand: Estimand,
) -> std::result::Result<(PointEstimate<T>, WeightSet<T>), Failure> {
    let weights = compute_weights(estimand, data.treatment(), bundle.ps.fitted.view())
        .map_err(at(Stage::Weights))?;
    let est = match imputed_arm(estimand) {
        None => hajek_wate(&weights, data.outcome()),
        Some(arm) => {
            let or = bundle.outcome_fit(arm)?;
            dr_estimate(&weights, data.outcome(), or.fitted_all.view())
                .map_err(at(Stage::Weights))?
        }
    };
    Ok((est, weights))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub alpha: f64,
    pub diagnostics: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            methods: Method::ALL.to_vec(),
            replicates: 1000,
            alpha: 0.05,
            diagnostics: true,
        }
    }
}

/// Variance result of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodEstimate<T> {
    pub inference: Inference<T>,
    /// Wild bootstrap: direct second-moment SE `√(Σ̂*/N)`.
    pub se_direct: Option<T>,
    /// Wild bootstrap: `2τ̂ − mean(τ̂*)`.
    pub bias_corrected: Option<T>,
    /// Standard bootstrap: failed and successful replicates.
    pub failures: usize,
    pub successes: usize,
}

impl<T: Scalar> MethodEstimate<T> {
    fn plain(inference: Inference<T>) -> Self {
        MethodEstimate {
            inference,
            se_direct: None,
            bias_corrected: None,
            failures: 0,
            successes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult<T> {
    pub method: Method,
    pub result: std::result::Result<MethodEstimate<T>, Failure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport<T> {
    pub estimand: Estimand,
    pub n: usize,
    pub point: std::result::Result<PointEstimate<T>, Failure>,
    pub methods: Vec<MethodResult<T>>,
    pub diagnostics: Option<std::result::Result<DiagnosticsReport<T>, Failure>>,
}

impl<T: Scalar> EstimateReport<T> {
    pub fn method(
        &self,
        method: Method,
    ) -> Option<&std::result::Result<MethodEstimate<T>, Failure>> {
        self.methods
            .iter()
            .find(|m| m.method == method)
            .map(|m| &m.result)
    }
}

fn sandwich_for<T: Scalar>(
    data: &Dataset<T>,
    bundle: &FitBundle<T>,
    estimand: Estimand,
    alpha: f64,
) -> std::result::Result<Inference<T>, Failure> {
    let (z, y) = (data.treatment(), data.outcome());
    let se = match imputed_arm(estimand) {
        None => {
            let eqs = WateEquations::new(&bundle.v, z, y, estimand, &bundle.ps)
                .map_err(at(Stage::Weights))?;
            sandwich(&eqs, alpha)
        }
        Some(arm) => {
            let or = bundle.outcome_fit(arm)?;
            let eqs = DrEquations::new(&bundle.v, &bundle.w, z, y, estimand, &bundle.ps, or)
                .map_err(at(Stage::Weights))?;
            sandwich(&eqs, alpha)
        }
    };
    se.map(|(_, s)| s.inference).map_err(at(Stage::Variance))
}

fn wild_for<T: Scalar>(
    data: &Dataset<T>,
    bundle: &FitBundle<T>,
    estimand: Estimand,
    tau_hat: T,
    multiplier: Multiplier,
    opts: &EstimateOptions,
    seed: SeedStream,
) -> std::result::Result<MethodEstimate<T>, Failure> {
    let Some(arm) = imputed_arm(estimand) else {
        return Err(Failure::new(
            Stage::Variance,
            Error::Unsupported("wild bootstrap covers ATT and ATC".into()),
        ));
    };
    let or = bundle.outcome_fit(arm)?;
    let phi = efficient_influence(
        estimand,
        data.treatment(),
        data.outcome(),
        bundle.ps.fitted.view(),
        or.fitted_all.view(),
        tau_hat,
    )
    .map_err(at(Stage::Variance))?;
    let draws = wild_bootstrap(&phi, tau_hat, opts.replicates, multiplier, seed);
    let se = iqr_se(&draws).map_err(at(Stage::Variance))?;
    let bc = bias_corrected(tau_hat, &draws.tau_star, se.se, opts.alpha);
    Ok(MethodEstimate {
        inference: wild_ci(tau_hat, se.se, opts.alpha),
        se_direct: Some(se.se_direct),
        bias_corrected: Some(bc.estimate),
        failures: 0,
        successes: draws.replicates,
    })
}

/// Runs every requested estimand and method on one dataset.
///
/// Input errors (missing columns, invalid designs) are returned as `Err`;
/// model and variance failures are recorded inside the reports.
pub fn analyze<T: Scalar>(
    data: &Dataset<T>,
    spec: &ModelSpec,
    estimands: &[Estimand],
    opts: &EstimateOptions,
    seed: SeedStream,
) -> Result<Vec<EstimateReport<T>>> {
    let bundle = match fit_bundle(data, spec) {
        Ok(b) => Ok(b),
        Err(f) if f.stage == Stage::Input => return Err(f.error),
        Err(f) => Err(f),
    };

    let points: Vec<_> = estimands
        .iter()
        .map(|&est| match &bundle {
            Ok(b) => point_estimate(data, b, est),
            Err(f) => Err(f.clone()),
        })
        .collect();

    // One set of bootstrap refits serves all estimands.
    let boot =
        if opts.methods.contains(&Method::StandardBootstrap) && points.iter().any(|p| p.is_ok()) {
            Some(resample_estimates(
                data,
                spec,
                estimands,
                opts.replicates,
                seed.child(tag("standard_bootstrap")),
            ))
        } else {
            None
        };

    let mut reports = Vec::with_capacity(estimands.len());
    for (k, (&estimand, point)) in estimands.iter().zip(points).enumerate() {
        let mut methods = Vec::with_capacity(opts.methods.len());
        for &method in &opts.methods {
            let result = match (&bundle, &point) {
                (Err(f), _) | (_, Err(f)) => Err(f.clone()),
                (Ok(b), Ok((est, _))) => match method {
                    Method::Sandwich => {
                        sandwich_for(data, b, estimand, opts.alpha).map(MethodEstimate::plain)
                    }
                    Method::WildRademacher | Method::WildExponential => {
                        let stream = seed
                            .child(tag(method.as_str()))
                            .child(tag(estimand.as_str()));
                        let mult = method.multiplier().expect("wild method");
                        wild_for(data, b, estimand, est.value, mult, opts, stream)
                    }
                    Method::StandardBootstrap => {
                        let draws = &boot.as_ref().expect("bootstrap draws")[k];
                        bootstrap_se(draws, est.value, opts.alpha)
                            .map_err(at(Stage::Variance))
                            .map(|inf| MethodEstimate {
                                inference: inf,
                                se_direct: None,
                                bias_corrected: None,
                                failures: draws.n_failures(),
                                successes: draws.estimates.len(),
                            })
                    }
                },
            };
            methods.push(MethodResult { method, result });
        }
        let diagnostics = match (&point, opts.diagnostics) {
            (Ok((_, w)), true) => Some(
                diagnose(
                    w,
                    data.treatment(),
                    data.covariates().view(),
                    data.covariate_names(),
                )
                .map_err(at(Stage::Weights)),
            ),
            _ => None,
        };
        reports.push(EstimateReport {
            estimand,
            n: data.len(),
            point: point.map(|(p, _)| p),
            methods,
            diagnostics,
        });
    }
    Ok(reports)
}

/// Propensity scores by arm, for overlap plots.
pub fn propensity_by_arm<T: Scalar>(
    bundle: &FitBundle<T>,
    treatment: &[bool],
) -> (Array1<T>, Array1<T>) {
    let pick = |arm: bool| -> Array1<T> {
        bundle
            .ps
            .fitted
            .iter()
            .zip(treatment)
            .filter(|(_, &t)| t == arm)
            .map(|(&e, _)| e)
            .collect()
    };
    (pick(true), pick(false))
}
