//! Flag and TOML configuration. Precedence: flag, then config file, then the
//! `DRVAR_OUTPUT_DIR` environment variable (output directory only), then defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};

use drvar::io::OutcomeTransform;
use drvar::sim::{Effect, ModelId, SpecCell};
use drvar::{Error, Estimand, Method, Result};

pub const OUTPUT_DIR_ENV: &str = "DRVAR_OUTPUT_DIR";

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("drvar-out"))
}

fn parse_list<T: FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items
        .iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

fn read_toml<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidInput(format!("`{name}` is required (flag or config file)")))
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// TOML file with any of the settings below (snake_case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Treatment column, coded 0/1.
    #[arg(long)]
    pub treatment: Option<String>,
    /// Propensity-model covariates, comma separated.
    #[arg(long = "ps-cols", value_delimiter = ',')]
    pub ps_cols: Option<Vec<String>>,
    /// Outcome-model covariates, comma separated.
    #[arg(long = "or-cols", value_delimiter = ',')]
    pub or_cols: Option<Vec<String>>,
    /// Extra covariates reported in the balance table.
    #[arg(long = "balance-cols", value_delimiter = ',')]
    pub balance_cols: Option<Vec<String>>,
    /// Any of ATT, ATC, ATE.
    #[arg(long, value_delimiter = ',')]
    pub estimands: Option<Vec<String>>,
    /// Any of sandwich, wild_rademacher, wild_exponential, standard_bootstrap.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Bootstrap replicates R.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outcome transform: none or log.
    #[arg(long)]
    pub transform: Option<String>,
    #[arg(long = "output-dir")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateFile {
    data_path: Option<PathBuf>,
    outcome_column: Option<String>,
    treatment_column: Option<String>,
    ps_columns: Option<Vec<String>>,
    or_columns: Option<Vec<String>>,
    balance_columns: Option<Vec<String>>,
    estimands: Option<Vec<String>>,
    methods: Option<Vec<String>>,
    replicates: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    transform: Option<String>,
    output_dir: Option<PathBuf>,
}

/// Fully resolved settings of an `estimate` run, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisConfig {
    pub data_path: PathBuf,
    pub outcome_column: String,
    pub treatment_column: String,
    pub ps_columns: Vec<String>,
    pub or_columns: Vec<String>,
    pub balance_columns: Vec<String>,
    pub estimands: Vec<Estimand>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub transform: OutcomeTransform,
    /// Left out of the manifest so runs into different directories match byte for byte.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl AnalysisConfig {
    pub fn resolve(args: EstimateArgs) -> Result<Self> {
        let file: EstimateFile = read_toml(args.config.as_deref())?;
        let estimands = args
            .estimands
            .or(file.estimands)
            .unwrap_or_else(|| vec!["ATT".into(), "ATC".into()]);
        let methods = args.methods.or(file.methods);
        let methods = match methods {
            Some(m) => parse_list(&m)?,
            None => Method::ALL.to_vec(),
        };
        let transform = match args.transform.or(file.transform) {
            Some(t) => t.parse()?,
            None => OutcomeTransform::None,
        };
        let cfg = AnalysisConfig {
            data_path: required(args.data.or(file.data_path), "data")?,
            outcome_column: required(args.outcome.or(file.outcome_column), "outcome")?,
            treatment_column: required(args.treatment.or(file.treatment_column), "treatment")?,
            ps_columns: required(args.ps_cols.or(file.ps_columns), "ps-cols")?,
            or_columns: required(args.or_cols.or(file.or_columns), "or-cols")?,
            balance_columns: args
                .balance_cols
                .or(file.balance_columns)
                .unwrap_or_default(),
            estimands: parse_list(&estimands)?,
            methods,
            replicates: args.replicates.or(file.replicates).unwrap_or(1000),
            alpha: check_alpha(args.alpha.or(file.alpha).unwrap_or(0.05))?,
            seed: args.seed.or(file.seed).unwrap_or(1),
            transform,
            output_dir: args
                .output_dir
                .or(file.output_dir)
                .unwrap_or_else(default_output_dir),
        };
        if cfg.estimands.is_empty() || cfg.methods.is_empty() {
            return Err(Error::InvalidInput(
                "at least one estimand and one method are required".into(),
            ));
        }
        if cfg.replicates < 2 {
            return Err(Error::InvalidInput("replicates must be at least 2".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with any of the settings below (snake_case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Models 1, 2, 3, 4, 5a, 5b (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    /// constant and/or heterogeneous.
    #[arg(long, value_delimiter = ',')]
    pub effect: Option<Vec<String>>,
    /// Sample size; defaults to the model's own (1000, or 100/50 for 5a/5b).
    #[arg(long)]
    pub n: Option<usize>,
    /// Specification cells: both_correct, ps_correct, or_correct, both_wrong.
    #[arg(long, value_delimiter = ',')]
    pub cells: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub estimands: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Monte Carlo replicates M.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Bootstrap replicates R.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Superpopulation size for the true effects.
    #[arg(long)]
    pub superpop: Option<usize>,
    /// Use M = 1000 and R = 1000 unless given explicitly.
    #[arg(long = "full-scale")]
    pub full_scale: bool,
    #[arg(long = "output-dir")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    model: Option<Vec<String>>,
    effect: Option<Vec<String>>,
    n: Option<usize>,
    cells: Option<Vec<String>>,
    estimands: Option<Vec<String>>,
    methods: Option<Vec<String>>,
    replicates: Option<usize>,
    bootstrap: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    superpop: Option<usize>,
    full_scale: Option<bool>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationConfig {
    pub models: Vec<ModelId>,
    pub effects: Vec<Effect>,
    pub n: Option<usize>,
    pub cells: Vec<SpecCell>,
    pub estimands: Vec<Estimand>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub bootstrap: usize,
    pub alpha: f64,
    pub seed: u64,
    pub superpop_size: usize,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl SimulationConfig {
    pub fn resolve(args: SimulateArgs) -> Result<Self> {
        let file: SimulateFile = read_toml(args.config.as_deref())?;
        let full = args.full_scale || file.full_scale.unwrap_or(false);
        let list = |a: Option<Vec<String>>, f: Option<Vec<String>>, d: &[&str]| {
            a.or(f)
                .unwrap_or_else(|| d.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        };
        let cfg = SimulationConfig {
            models: parse_list(&list(args.model, file.model, &["2"]))?,
            effects: parse_list(&list(args.effect, file.effect, &["heterogeneous"]))?,
            n: args.n.or(file.n),
            cells: parse_list(&list(
                args.cells,
                file.cells,
                &["both_correct", "ps_correct", "or_correct", "both_wrong"],
            ))?,
            estimands: parse_list(&list(args.estimands, file.estimands, &["ATT", "ATC"]))?,
            methods: parse_list(&list(
                args.methods,
                file.methods,
                &[
                    "sandwich",
                    "wild_rademacher",
                    "wild_exponential",
                    "standard_bootstrap",
                ],
            ))?,
            replicates: args.replicates.or(file.replicates).unwrap_or(if full {
                1000
            } else {
                200
            }),
            bootstrap: args
                .bootstrap
                .or(file.bootstrap)
                .unwrap_or(if full { 1000 } else { 500 }),
            alpha: check_alpha(args.alpha.or(file.alpha).unwrap_or(0.05))?,
            seed: args.seed.or(file.seed).unwrap_or(20240101),
            superpop_size: args.superpop.or(file.superpop).unwrap_or(1_000_000),
            output_dir: args
                .output_dir
                .or(file.output_dir)
                .unwrap_or_else(default_output_dir),
        };
        if cfg.models.is_empty()
            || cfg.effects.is_empty()
            || cfg.cells.is_empty()
            || cfg.estimands.is_empty()
        {
            return Err(Error::InvalidInput(
                "model, effect, cells and estimands must be non-empty".into(),
            ));
        }
        if cfg.replicates < 2 || cfg.bootstrap < 2 {
            return Err(Error::InvalidInput(
                "replicates and bootstrap must be at least 2".into(),
            ));
        }
        Ok(cfg)
    }
}
