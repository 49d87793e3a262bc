//! CSV ingestion and the report files written by the command-line tool.
//!
//! Numbers in CSV files carry six significant digits with a dot decimal
//! separator; column order is fixed.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::EstimateReport;
use crate::scalar::Scalar;
use crate::sim::{EssSummary, FailureRow, MetricsRow, TruthEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeTransform {
    #[default]
    None,
    Log,
}

impl FromStr for OutcomeTransform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "identity" => Ok(OutcomeTransform::None),
            "log" => Ok(OutcomeTransform::Log),
            other => Err(Error::InvalidInput(format!(
                "unknown outcome transform `{other}`"
            ))),
        }
    }
}

impl fmt::Display for OutcomeTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeTransform::None => "none",
            OutcomeTransform::Log => "log",
        })
    }
}

/// Which columns of a CSV file to read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub outcome: String,
    pub treatment: String,
    /// Covariates to keep, in order. Duplicates are ignored.
    pub covariates: Vec<String>,
    #[serde(default)]
    pub transform: OutcomeTransform,
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_number(field: &str, line: usize, column: &str) -> Result<f64> {
    let t = field.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Err(Error::Parse {
            line,
            column: column.to_string(),
            message: "missing value".into(),
        });
    }
    let v: f64 = t.parse().map_err(|_| Error::Parse {
        line,
        column: column.to_string(),
        message: format!("`{t}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            column: column.to_string(),
            message: format!("`{t}` is not finite"),
        });
    }
    Ok(v)
}

/// Reads a dataset from CSV text with a header row.
pub fn read_csv<T: Scalar, R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let yi = header_index(&headers, &schema.outcome)?;
    let zi = header_index(&headers, &schema.treatment)?;
    let mut names: Vec<String> = Vec::new();
    for c in &schema.covariates {
        if !names.contains(c) {
            names.push(c.clone());
        }
    }
    let xi: Vec<usize> = names
        .iter()
        .map(|c| header_index(&headers, c))
        .collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut x = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut yv = parse_number(&rec[yi], line, &schema.outcome)?;
        if schema.transform == OutcomeTransform::Log {
            if !(yv > 0.0) {
                return Err(Error::Parse {
                    line,
                    column: schema.outcome.clone(),
                    message: format!("log transform needs a positive outcome, got {yv}"),
                });
            }
            yv = yv.ln();
        }
        let zt = rec[zi].trim();
        let treated = match zt {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::NonBinaryTreatment {
                    line,
                    value: other.to_string(),
                })
            }
        };
        for (&j, name) in xi.iter().zip(&names) {
            x.push(T::lit(parse_number(&rec[j], line, name)?));
        }
        y.push(T::lit(yv));
        z.push(treated);
    }
    let n = y.len();
    let covariates =
        Array2::from_shape_vec((n, names.len()), x).expect("row-major covariate buffer");
    Dataset::new(Array1::from(y), z, covariates, names)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_csv(std::io::BufReader::new(file), schema)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse {
            line,
            column: String::new(),
            message: e.to_string(),
        },
    }
}

/// Six significant digits, plain decimal notation for ordinary magnitudes.
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float");
    let mag = rounded.abs().log10();
    if (-5.0..15.0).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn opt6<T: Scalar>(x: Option<T>) -> String {
    x.map(|v| fmt6(v.as_f64())).unwrap_or_default()
}

fn to_io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `estimates.csv`: one row per estimand and method.
pub fn write_estimates<T: Scalar, W: Write>(out: W, reports: &[EstimateReport<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "estimand",
        "method",
        "estimate",
        "se",
        "ci_low",
        "ci_high",
        "p_value",
        "se_direct",
        "bias_corrected",
        "replicates_ok",
        "replicates_failed",
        "status",
        "error",
    ])
    .map_err(to_io)?;
    for r in reports {
        for m in &r.methods {
            let est = r
                .point
                .as_ref()
                .map(|p| fmt6(p.value.as_f64()))
                .unwrap_or_default();
            let row: Vec<String> = match &m.result {
                Ok(me) => {
                    let inf = &me.inference;
                    vec![
                        r.estimand.to_string(),
                        m.method.to_string(),
                        fmt6(inf.estimate.as_f64()),
                        fmt6(inf.se.as_f64()),
                        fmt6(inf.ci_low.as_f64()),
                        fmt6(inf.ci_high.as_f64()),
                        fmt6(inf.p_value),
                        opt6(me.se_direct),
                        opt6(me.bias_corrected),
                        me.successes.to_string(),
                        me.failures.to_string(),
                        "ok".into(),
                        String::new(),
                    ]
                }
                Err(f) => vec![
                    r.estimand.to_string(),
                    m.method.to_string(),
                    est,
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    f.error.kind().to_string(),
                    f.to_string(),
                ],
            };
            w.write_record(&row).map_err(to_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `diagnostics.csv` in long form: `section, estimand, item, statistic, value`.
///
/// The `ess` section lists N and ESS per arm; `weights` holds the design effect
/// and variance inflation; `smd` holds unweighted and weighted standardized
/// differences per covariate.
pub fn write_diagnostics<T: Scalar, W: Write>(out: W, reports: &[EstimateReport<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["section", "estimand", "item", "statistic", "value"])
        .map_err(to_io)?;
    {
        let mut row = |s: &str, e: &str, i: &str, k: &str, v: String| {
            w.write_record([s, e, i, k, &v]).map_err(to_io)
        };
        for r in reports {
            let est = r.estimand.as_str();
            let Some(Ok(d)) = &r.diagnostics else {
                continue;
            };
            let e = &d.ess;
            row("ess", est, "treated", "n", e.n_treated.to_string())?;
            row("ess", est, "treated", "ess", fmt6(e.ess_treated.as_f64()))?;
            row("ess", est, "control", "n", e.n_control.to_string())?;
            row("ess", est, "control", "ess", fmt6(e.ess_control.as_f64()))?;
            row("weights", est, "", "ess", fmt6(e.ess.as_f64()))?;
            row(
                "weights",
                est,
                "",
                "design_effect",
                fmt6(e.design_effect.as_f64()),
            )?;
            row(
                "weights",
                est,
                "",
                "variance_inflation",
                fmt6(d.variance_inflation.as_f64()),
            )?;
            for s in &d.smd {
                row(
                    "smd",
                    est,
                    &s.covariate,
                    "unweighted",
                    fmt6(s.unweighted.as_f64()),
                )?;
                if let Some(v) = s.weighted {
                    row("smd", est, &s.covariate, "weighted", fmt6(v.as_f64()))?;
                }
                row(
                    "smd",
                    est,
                    &s.covariate,
                    "imbalanced",
                    (s.imbalanced as u8).to_string(),
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Fitted propensity scores with treatment status, for overlap plots.
pub fn write_propensity<T: Scalar, W: Write>(
    out: W,
    treatment: &[bool],
    e_hat: &[T],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit", "treated", "propensity"])
        .map_err(to_io)?;
    for (i, (&t, &e)) in treatment.iter().zip(e_hat).enumerate() {
        w.write_record([(i + 1).to_string(), (t as u8).to_string(), fmt6(e.as_f64())])
            .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

fn estimand_label(e: crate::weights::Estimand) -> &'static str {
    e.as_str()
}

/// Metrics table: `Est, Method, Spec, Bias, RMSE, SE, ESD, RE, CP` plus replicate counts.
pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "Est",
        "Method",
        "Spec",
        "Bias",
        "RMSE",
        "SE",
        "ESD",
        "RE",
        "CP",
        "Truth",
        "Mean",
        "Successes",
        "Failures",
    ])
    .map_err(to_io)?;
    for r in rows {
        let s = &r.summary;
        w.write_record([
            estimand_label(r.estimand).to_string(),
            r.method.label().to_string(),
            r.cell.as_str().to_string(),
            fmt6(s.bias_pct),
            fmt6(s.rmse),
            fmt6(s.se_median),
            fmt6(s.esd),
            fmt6(s.re_median),
            fmt6(s.cp),
            fmt6(r.truth),
            fmt6(s.mean_estimate),
            s.n_success.to_string(),
            s.n_failures.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_failures<W: Write>(
    out: W,
    model: &str,
    effect: &str,
    rows: &[FailureRow],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model", "effect", "spec", "estimand", "method", "stage", "error", "count",
    ])
    .map_err(to_io)?;
    for r in rows {
        w.write_record([
            model,
            effect,
            r.cell.as_str(),
            estimand_label(r.estimand),
            r.method.as_str(),
            r.stage.as_str(),
            r.kind,
            &r.count.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_truths<W: Write>(out: W, rows: &[TruthEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "effect",
        "estimand",
        "truth",
        "mc_se",
        "superpop_size",
        "treated_fraction",
    ])
    .map_err(to_io)?;
    for t in rows {
        w.write_record([
            t.model.as_str().to_string(),
            t.effect.as_str().to_string(),
            estimand_label(t.estimand).to_string(),
            fmt6(t.value),
            fmt6(t.mc_se),
            t.superpop_size.to_string(),
            fmt6(t.treated_fraction),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ess<W: Write>(out: W, model: &str, effect: &str, rows: &[EssSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "effect",
        "spec",
        "estimand",
        "mean_ess_treated",
        "mean_ess_control",
        "replicates",
    ])
    .map_err(to_io)?;
    for r in rows {
        w.write_record([
            model.to_string(),
            effect.to_string(),
            r.cell.as_str().to_string(),
            estimand_label(r.estimand).to_string(),
            fmt6(r.mean_ess_treated),
            fmt6(r.mean_ess_control),
            r.replicates.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
