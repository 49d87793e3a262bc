//! `drvar estimate` analyses a CSV file; `drvar simulate` runs the Monte Carlo lab.
//!
//! Settings come from flags and an optional TOML file (`--config`); flags win.
//! On failure a JSON error object is printed to stderr and the exit status is 1.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{AnalysisConfig, EstimateArgs, SimulateArgs, SimulationConfig};
use drvar::io::{
    load_csv, write_diagnostics, write_ess, write_estimates, write_failures, write_metrics,
    write_propensity, write_truths, CsvSchema,
};
use drvar::pipeline::{analyze, fit_bundle, EstimateOptions};
use drvar::sim::{run_monte_carlo, SimConfig};
use drvar::{Dataset64, Error, ModelSpec, SeedStream};

#[derive(Debug, Parser)]
#[command(
    name = "drvar",
    version,
    about = "Doubly robust ATT/ATC estimation with sandwich and bootstrap variances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate effects on a CSV dataset.
    Estimate(EstimateArgs),
    /// Run the simulation study for one model and effect type.
    Simulate(SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => AnalysisConfig::resolve(args).and_then(|cfg| run_estimate(&cfg)),
        Command::Simulate(args) => {
            SimulationConfig::resolve(args).and_then(|cfg| run_simulate(&cfg))
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!(
                "{}",
                json!({"error": {"kind": "NoSuccessfulResult", "message": "a requested cell produced no successful method result"}})
            );
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": {"kind": e.kind(), "message": e.to_string()}})
            );
            ExitCode::FAILURE
        }
    }
}

fn create(dir: &Path, name: &str) -> drvar::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn ensure_dir(dir: &Path) -> drvar::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn write_manifest(dir: &Path, value: &serde_json::Value) -> drvar::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text + "\n").map_err(|e| Error::Io(e.to_string()))
}

/// Returns whether every estimand produced at least one successful method.
fn run_estimate(cfg: &AnalysisConfig) -> drvar::Result<bool> {
    let mut covariates = cfg.ps_columns.clone();
    covariates.extend(cfg.or_columns.iter().cloned());
    covariates.extend(cfg.balance_columns.iter().cloned());
    let schema = CsvSchema {
        outcome: cfg.outcome_column.clone(),
        treatment: cfg.treatment_column.clone(),
        covariates,
        transform: cfg.transform,
    };
    let data: Dataset64 = load_csv(&cfg.data_path, &schema)?;
    let spec = ModelSpec::new(cfg.ps_columns.clone(), cfg.or_columns.clone());
    let opts = EstimateOptions {
        methods: cfg.methods.clone(),
        replicates: cfg.replicates,
        alpha: cfg.alpha,
        diagnostics: true,
    };
    let reports = analyze(
        &data,
        &spec,
        &cfg.estimands,
        &opts,
        SeedStream::new(cfg.seed),
    )?;

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    write_estimates(create(dir, "estimates.csv")?, &reports)?;
    write_diagnostics(create(dir, "diagnostics.csv")?, &reports)?;
    let mut outputs = vec!["estimates.csv", "diagnostics.csv"];
    if let Ok(bundle) = fit_bundle(&data, &spec) {
        write_propensity(
            create(dir, "propensity.csv")?,
            data.treatment(),
            bundle.ps.fitted.as_slice().expect("contiguous"),
        )?;
        outputs.push("propensity.csv");
    }
    write_manifest(
        dir,
        &json!({
            "tool": "drvar",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "estimate",
            "seed": cfg.seed,
            "config": cfg,
            "data": {"rows": data.len(), "treated": data.n_treated(), "control": data.n_control()},
            "outputs": outputs,
        }),
    )?;
    Ok(reports
        .iter()
        .all(|r| r.methods.iter().any(|m| m.result.is_ok())))
}

fn run_simulate(cfg: &SimulationConfig) -> drvar::Result<bool> {
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut all_ok = true;
    let mut outputs: Vec<String> = Vec::new();
    for &model in &cfg.models {
        for &effect in &cfg.effects {
            let sim = SimConfig {
                model,
                effect,
                n: cfg.n.unwrap_or(model.default_n()),
                cells: cfg.cells.clone(),
                estimands: cfg.estimands.clone(),
                methods: cfg.methods.clone(),
                replicates: cfg.replicates,
                bootstrap: cfg.bootstrap,
                alpha: cfg.alpha,
                seed: cfg.seed,
                superpop_size: cfg.superpop_size,
            };
            let report = run_monte_carlo(&sim)?;
            let stem = format!("model{}_{}", model.as_str(), effect.as_str());
            let files = [
                format!("metrics_{stem}.csv"),
                format!("failures_{stem}.csv"),
                format!("truth_{stem}.csv"),
                format!("ess_{stem}.csv"),
            ];
            write_metrics(create(dir, &files[0])?, &report.metrics)?;
            write_failures(
                create(dir, &files[1])?,
                model.as_str(),
                effect.as_str(),
                &report.failures,
            )?;
            write_truths(create(dir, &files[2])?, &report.truths)?;
            write_ess(
                create(dir, &files[3])?,
                model.as_str(),
                effect.as_str(),
                &report.ess,
            )?;
            outputs.extend(files);
            for &cell in &sim.cells {
                for &est in &sim.estimands {
                    let any = report
                        .metrics
                        .iter()
                        .any(|m| m.cell == cell && m.estimand == est && m.summary.n_success > 0);
                    all_ok &= any;
                }
            }
        }
    }
    write_manifest(
        dir,
        &json!({
            "tool": "drvar",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "simulate",
            "seed": cfg.seed,
            "config": cfg,
            "outputs": outputs,
        }),
    )?;
    Ok(all_ok)
}
