//! Simulation laboratory: the seven-covariate data-generating process,
//! superpopulation truths and the Monte Carlo comparison of variance methods.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ModelSpec};
use crate::error::{Error, Result};
use crate::fit::logistic;
use crate::pipeline::{analyze, EstimateOptions, Method, Stage};
use crate::rng::{tag, SeedStream};
use crate::scalar::Scalar;
use crate::weights::Estimand;

/// Covariate names produced by the generator, in column order.
pub const COVARIATES: [&str; 9] = ["X1", "X2", "X3", "X4", "X5", "X6", "X7", "X1X2sq", "X1X3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "1")]
    M1,
    #[serde(rename = "2")]
    M2,
    #[serde(rename = "3")]
    M3,
    #[serde(rename = "4")]
    M4,
    #[serde(rename = "5a")]
    M5a,
    #[serde(rename = "5b")]
    M5b,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::M1,
        ModelId::M2,
        ModelId::M3,
        ModelId::M4,
        ModelId::M5a,
        ModelId::M5b,
    ];

    /// Treatment-model coefficients on `(1, X1, …, X7)`.
    pub fn beta(self) -> [f64; 8] {
        let tail = [0.3, 0.4, 0.4, 0.4, -0.1, -0.1, 0.1];
        let with = |b0: f64| {
            let mut b = [b0; 8];
            b[1..].copy_from_slice(&tail);
            b
        };
        match self {
            ModelId::M1 | ModelId::M5a | ModelId::M5b => with(-2.17),
            ModelId::M2 => with(-0.78),
            ModelId::M3 => with(0.98),
            ModelId::M4 => [0.2, 1.0, -0.9, -0.9, 0.9, 0.15, 0.15, -0.2],
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            ModelId::M5a => 100,
            ModelId::M5b => 50,
            _ => 1000,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::M1 => "1",
            ModelId::M2 => "2",
            ModelId::M3 => "3",
            ModelId::M4 => "4",
            ModelId::M5a => "5a",
            ModelId::M5b => "5b",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("model").unwrap_or(&key).trim();
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Constant,
    Heterogeneous,
}

impl Effect {
    pub fn as_str(self) -> &'static str {
        match self {
            Effect::Constant => "constant",
            Effect::Heterogeneous => "heterogeneous",
        }
    }

    /// `δ(x)`.
    pub fn delta(self, x1: f64, x2: f64, x3: f64) -> f64 {
        match self {
            Effect::Constant => 4.0,
            Effect::Heterogeneous => 4.0 + 3.0 * (x1 + x2).powi(2) + x1 * x3,
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Effect {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" | "c" => Ok(Effect::Constant),
            "heterogeneous" | "h" | "het" => Ok(Effect::Heterogeneous),
            other => Err(Error::InvalidInput(format!("unknown effect `{other}`"))),
        }
    }
}

/// Which nuisance models are correctly specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecCell {
    BothCorrect,
    PsCorrect,
    OrCorrect,
    BothWrong,
}

impl SpecCell {
    pub const ALL: [SpecCell; 4] = [
        SpecCell::BothCorrect,
        SpecCell::PsCorrect,
        SpecCell::OrCorrect,
        SpecCell::BothWrong,
    ];

    pub fn flags(self) -> (bool, bool) {
        match self {
            SpecCell::BothCorrect => (true, true),
            SpecCell::PsCorrect => (true, false),
            SpecCell::OrCorrect => (false, true),
            SpecCell::BothWrong => (false, false),
        }
    }

    pub fn from_flags(ps_correct: bool, or_correct: bool) -> Self {
        match (ps_correct, or_correct) {
            (true, true) => SpecCell::BothCorrect,
            (true, false) => SpecCell::PsCorrect,
            (false, true) => SpecCell::OrCorrect,
            (false, false) => SpecCell::BothWrong,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpecCell::BothCorrect => "both_correct",
            SpecCell::PsCorrect => "ps_correct",
            SpecCell::OrCorrect => "or_correct",
            SpecCell::BothWrong => "both_wrong",
        }
    }
}

impl fmt::Display for SpecCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpecCell {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SpecCell::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown specification cell `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub model: ModelId,
    pub effect: Effect,
    pub n: usize,
    pub ps_correct: bool,
    pub or_correct: bool,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(model: ModelId, effect: Effect) -> Self {
        DgpConfig {
            model,
            effect,
            n: model.default_n(),
            ps_correct: true,
            or_correct: true,
            seed: 1,
        }
    }
}

/// Correct PS: X1–X7. Misspecified PS drops X5–X7. Correct OR: X1–X4,
/// (X1+X2)² and X1·X3, which spans both potential-outcome means. Misspecified
/// OR drops (X1+X2)².
pub fn model_spec_for(ps_correct: bool, or_correct: bool) -> ModelSpec {
    let s = |v: &[&str]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    let ps = if ps_correct {
        s(&COVARIATES[..7])
    } else {
        s(&COVARIATES[..4])
    };
    let or = if or_correct {
        s(&["X1", "X2", "X3", "X4", "X1X2sq", "X1X3"])
    } else {
        s(&["X1", "X2", "X3", "X4", "X1X3"])
    };
    ModelSpec::new(ps, or).labelled(SpecCell::from_flags(ps_correct, or_correct).as_str())
}

/// A generated sample together with each unit's individual effect.
#[derive(Debug, Clone)]
pub struct Population<T> {
    pub data: Dataset<T>,
    pub delta: Vec<f64>,
}

/// Draws `n` units. The stream is consumed unit by unit, so the first `k`
/// units of a larger draw equal a draw of size `k` from the same stream.
pub fn generate_population<T: Scalar, R: Rng + ?Sized>(
    model: ModelId,
    effect: Effect,
    n: usize,
    rng: &mut R,
) -> Population<T> {
    let beta = model.beta();
    let mut x = Array2::<T>::zeros((n, COVARIATES.len()));
    let mut y = Array1::<T>::zeros(n);
    let mut z = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let (s3, s0) = (0.75f64.sqrt(), (2.0 - 0.25f64 * 0.25 / 2.0).sqrt());
    for i in 0..n {
        let x4 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let x3 = if rng.random::<f64>() < 0.4 + 0.2 * x4 {
            1.0
        } else {
            0.0
        };
        let mu1 = x4 - x3 + 0.5 * x3 * x4;
        let mu2 = x3 - x4 + x3 * x4;
        let (u, v): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        // Cholesky factors of [[1, .5], [.5, 1]] and [[2, .25], [.25, 2]].
        let (x1, x2) = if x3 == 1.0 {
            (mu1 + u, mu2 + 0.5 * u + s3 * v)
        } else {
            let r2 = 2.0f64.sqrt();
            (mu1 + r2 * u, mu2 + 0.25 / r2 * u + s0 * v)
        };
        let row = [
            x1,
            x2,
            x3,
            x4,
            x1 * x1,
            x1 * x2,
            x2 * x2,
            (x1 + x2).powi(2),
            x1 * x3,
        ];
        let lin = beta[0] + (0..7).map(|k| beta[k + 1] * row[k]).sum::<f64>();
        let treated = rng.random::<f64>() < logistic(lin);
        let eps = 2.0 * Distribution::<f64>::sample(&StandardNormal, rng);
        let y0 = 0.5 + x1 + 0.6 * x2 + 2.2 * x3 - 1.2 * x4 + (x1 + x2).powi(2) + eps;
        let d = effect.delta(x1, x2, x3);
        for (k, &val) in row.iter().enumerate() {
            x[(i, k)] = T::lit(val);
        }
        y[i] = T::lit(if treated { y0 + d } else { y0 });
        z.push(treated);
        delta.push(d);
    }
    let names = COVARIATES.iter().map(|c| c.to_string()).collect();
    let data = Dataset::new(y, z, x, names).expect("generator produces finite data");
    Population { data, delta }
}

pub fn generate_dgp<T: Scalar, R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Dataset<T> {
    generate_population(config.model, config.effect, config.n, rng).data
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub model: ModelId,
    pub effect: Effect,
    pub estimand: Estimand,
    pub value: f64,
    pub mc_se: f64,
    pub superpop_size: usize,
    pub treated_fraction: f64,
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Superpopulation truths for ATT, ATC and ATE of one model and effect.
pub fn truth_table(
    model: ModelId,
    effect: Effect,
    superpop_size: usize,
    seed: SeedStream,
) -> Vec<TruthEntry> {
    let pop = generate_population::<f64, _>(model, effect, superpop_size, &mut seed.rng(0));
    let z = pop.data.treatment();
    let treated: Vec<f64> = pop
        .delta
        .iter()
        .zip(z)
        .filter(|(_, &t)| t)
        .map(|(&d, _)| d)
        .collect();
    let control: Vec<f64> = pop
        .delta
        .iter()
        .zip(z)
        .filter(|(_, &t)| !t)
        .map(|(&d, _)| d)
        .collect();
    let frac = treated.len() as f64 / superpop_size as f64;
    [Estimand::Att, Estimand::Atc, Estimand::Ate]
        .into_iter()
        .map(|estimand| {
            let (value, mc_se) = match (effect, estimand) {
                (Effect::Constant, _) => (4.0, 0.0),
                (_, Estimand::Att) => mean_and_se(&treated),
                (_, Estimand::Atc) => mean_and_se(&control),
                (_, Estimand::Ate) => mean_and_se(&pop.delta),
            };
            TruthEntry {
                model,
                effect,
                estimand,
                value,
                mc_se,
                superpop_size,
                treated_fraction: frac,
            }
        })
        .collect()
}

pub fn true_effect(
    model: ModelId,
    effect: Effect,
    estimand: Estimand,
    superpop_size: usize,
    seed: SeedStream,
) -> TruthEntry {
    truth_table(model, effect, superpop_size, seed)
        .into_iter()
        .find(|t| t.estimand == estimand)
        .expect("all estimands tabulated")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelId,
    pub effect: Effect,
    pub n: usize,
    pub cells: Vec<SpecCell>,
    pub estimands: Vec<Estimand>,
    pub methods: Vec<Method>,
    /// Monte Carlo replicates `M`.
    pub replicates: usize,
    /// Bootstrap replicates `R`.
    pub bootstrap: usize,
    pub alpha: f64,
    pub seed: u64,
    pub superpop_size: usize,
}

impl SimConfig {
    /// Desk-scale defaults: `M = 200`, `R = 500`, superpopulation 10⁶.
    pub fn desk(model: ModelId, effect: Effect) -> Self {
        SimConfig {
            model,
            effect,
            n: model.default_n(),
            cells: SpecCell::ALL.to_vec(),
            estimands: vec![Estimand::Att, Estimand::Atc],
            methods: Method::ALL.to_vec(),
            replicates: 200,
            bootstrap: 500,
            alpha: 0.05,
            seed: 20240101,
            superpop_size: 1_000_000,
        }
    }

    /// Full scale: `M = 1000`, `R = 1000`.
    pub fn full(model: ModelId, effect: Effect) -> Self {
        SimConfig {
            replicates: 1000,
            bootstrap: 1000,
            ..SimConfig::desk(model, effect)
        }
    }

    /// Superpopulation truths for this model and effect.
    pub fn truths(&self) -> Vec<TruthEntry> {
        truth_table(
            self.model,
            self.effect,
            self.superpop_size,
            self.stream().child(tag("truth")),
        )
    }

    /// Root stream of the run, keyed by seed, model, effect and sample size.
    pub fn stream(&self) -> SeedStream {
        SeedStream::new(self.seed)
            .child(self.model.id())
            .child(self.effect as u64)
            .child(self.n as u64)
    }
}

/// What one method produced on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodOutcome {
    Ok {
        estimate: f64,
        se: f64,
        ci_low: f64,
        ci_high: f64,
    },
    Failed {
        stage: Stage,
        kind: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub cell: SpecCell,
    pub estimand: Estimand,
    pub n_treated: usize,
    /// ESS of the treated and control arms under the estimand's weights.
    pub ess: Option<(f64, f64)>,
    pub methods: Vec<(Method, MethodOutcome)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub model: ModelId,
    pub effect: Effect,
    pub cell: SpecCell,
    pub estimand: Estimand,
    pub method: Method,
    pub truth: f64,
    #[serde(flatten)]
    pub summary: Summary,
}

impl MetricsRow {
    /// Monte Carlo SE of the mean estimate, `ESD/√M`.
    pub fn mean_mc_se(&self) -> f64 {
        self.summary.esd / (self.summary.n_success as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRow {
    pub cell: SpecCell,
    pub estimand: Estimand,
    pub method: Method,
    pub stage: Stage,
    pub kind: &'static str,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssSummary {
    pub cell: SpecCell,
    pub estimand: Estimand,
    pub mean_ess_treated: f64,
    pub mean_ess_control: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub config: SimConfig,
    pub truths: Vec<TruthEntry>,
    pub records: Vec<ReplicateRecord>,
    pub metrics: Vec<MetricsRow>,
    pub failures: Vec<FailureRow>,
    pub ess: Vec<EssSummary>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Monte Carlo metrics over the successful replicates of one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n_success: usize,
    pub n_failures: usize,
    pub mean_estimate: f64,
    /// `100 |mean − τ| / |τ|`.
    pub bias_pct: f64,
    pub rmse: f64,
    pub se_median: f64,
    pub esd: f64,
    /// Median over replicates of `ESD² / SE_r²`.
    pub re_median: f64,
    pub cp: f64,
}

/// Aggregates replicate results of one (cell, estimand, method) against `truth`.
pub fn summarize(outcomes: &[&MethodOutcome], truth: f64) -> Summary {
    let ok: Vec<(f64, f64, bool)> = outcomes
        .iter()
        .filter_map(|o| match o {
            MethodOutcome::Ok {
                estimate,
                se,
                ci_low,
                ci_high,
            } => Some((*estimate, *se, *ci_low <= truth && truth <= *ci_high)),
            MethodOutcome::Failed { .. } => None,
        })
        .collect();
    let n_ok = ok.len();
    let n_fail = outcomes.len() - n_ok;
    let est: Vec<f64> = ok.iter().map(|r| r.0).collect();
    let mean = est.iter().sum::<f64>() / n_ok as f64;
    let bias = 100.0 * (mean - truth).abs() / truth.abs();
    let rmse = (est.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n_ok as f64).sqrt();
    let esd = sd(&est);
    let se_median = median(ok.iter().map(|r| r.1).collect());
    let re = median(ok.iter().map(|r| esd * esd / (r.1 * r.1)).collect());
    let cp = ok.iter().filter(|r| r.2).count() as f64 / n_ok as f64;
    Summary {
        n_success: n_ok,
        n_failures: n_fail,
        mean_estimate: mean,
        bias_pct: bias,
        rmse,
        se_median,
        esd,
        re_median: re,
        cp,
    }
}

fn run_replicate(
    cfg: &SimConfig,
    data: &Dataset<f64>,
    cell: SpecCell,
    rep: usize,
    opts: &EstimateOptions,
) -> Vec<ReplicateRecord> {
    let (ps_ok, or_ok) = cell.flags();
    let spec = model_spec_for(ps_ok, or_ok);
    let stream = cfg.stream().child(tag(cell.as_str())).child(rep as u64);
    let reports = analyze(data, &spec, &cfg.estimands, opts, stream)
        .expect("generated data carries every column");
    reports
        .into_iter()
        .map(|r| {
            let ess = match &r.diagnostics {
                Some(Ok(d)) => Some((d.ess.ess_treated, d.ess.ess_control)),
                _ => None,
            };
            let methods = r
                .methods
                .iter()
                .map(|m| {
                    let outcome = match &m.result {
                        Ok(me) => MethodOutcome::Ok {
                            estimate: me.inference.estimate,
                            se: me.inference.se,
                            ci_low: me.inference.ci_low,
                            ci_high: me.inference.ci_high,
                        },
                        Err(f) => MethodOutcome::Failed {
                            stage: f.stage,
                            kind: f.error.kind(),
                        },
                    };
                    (m.method, outcome)
                })
                .collect();
            ReplicateRecord {
                replicate: rep,
                cell,
                estimand: r.estimand,
                n_treated: data.n_treated(),
                ess,
                methods,
            }
        })
        .collect()
}

/// Runs every replicate of every specification cell and aggregates the metrics.
///
/// Replicate `m` draws its data from stream `m` of the data family, shared by
/// all cells, and its bootstrap multipliers from a stream keyed by
/// `(cell, m)`; results are bit-identical for any thread count.
pub fn run_monte_carlo(cfg: &SimConfig) -> Result<SimReport> {
    if cfg.replicates < 2 {
        return Err(Error::InvalidInput(
            "need at least two Monte Carlo replicates".into(),
        ));
    }
    let truths = cfg.truths();
    let opts = EstimateOptions {
        methods: cfg.methods.clone(),
        replicates: cfg.bootstrap,
        alpha: cfg.alpha,
        diagnostics: true,
    };
    let data_stream = cfg.stream().child(tag("data"));
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let data: Dataset<f64> = generate_population(
                cfg.model,
                cfg.effect,
                cfg.n,
                &mut data_stream.rng(rep as u64),
            )
            .data;
            cfg.cells
                .iter()
                .flat_map(|&cell| run_replicate(cfg, &data, cell, rep, &opts))
                .collect()
        })
        .collect();
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();

    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    let mut ess = Vec::new();
    for &cell in &cfg.cells {
        for &estimand in &cfg.estimands {
            let truth = truths
                .iter()
                .find(|t| t.estimand == estimand)
                .map(|t| t.value)
                .unwrap_or(f64::NAN);
            let recs: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.cell == cell && r.estimand == estimand)
                .collect();
            for &method in &cfg.methods {
                let outcomes: Vec<&MethodOutcome> = recs
                    .iter()
                    .filter_map(|r| r.methods.iter().find(|(m, _)| *m == method).map(|(_, o)| o))
                    .collect();
                metrics.push(MetricsRow {
                    model: cfg.model,
                    effect: cfg.effect,
                    cell,
                    estimand,
                    method,
                    truth,
                    summary: summarize(&outcomes, truth),
                });
                let mut counts: BTreeMap<(Stage, &'static str), usize> = BTreeMap::new();
                for o in &outcomes {
                    if let MethodOutcome::Failed { stage, kind } = o {
                        *counts.entry((*stage, *kind)).or_default() += 1;
                    }
                }
                for ((stage, kind), count) in counts {
                    failures.push(FailureRow {
                        cell,
                        estimand,
                        method,
                        stage,
                        kind,
                        count,
                    });
                }
            }
            let e: Vec<(f64, f64)> = recs.iter().filter_map(|r| r.ess).collect();
            if !e.is_empty() {
                let k = e.len() as f64;
                ess.push(EssSummary {
                    cell,
                    estimand,
                    mean_ess_treated: e.iter().map(|p| p.0).sum::<f64>() / k,
                    mean_ess_control: e.iter().map(|p| p.1).sum::<f64>() / k,
                    replicates: e.len(),
                });
            }
        }
    }
    Ok(SimReport {
        config: cfg.clone(),
        truths,
        records,
        metrics,
        failures,
        ess,
    })
}
