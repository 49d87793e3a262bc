//! Doubly robust ATT/ATC estimation with three variance estimators:
//! the M-estimation sandwich, the wild bootstrap on efficient influence
//! functions and the standard resampling bootstrap. A simulation lab
//! regenerates the benchmark data-generating process and scores the methods.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` case.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod resample;
pub mod rng;
pub mod sandwich;
pub mod scalar;
pub mod sim;
pub mod weights;
pub mod wild;

pub use data::{Dataset, DesignMatrix, ModelSpec};
pub use error::{Error, Result};
pub use fit::{Arm, OrFit, PsFit};
pub use pipeline::{analyze, EstimateOptions, EstimateReport, Method};
pub use rng::SeedStream;
pub use scalar::Scalar;
pub use weights::{Estimand, WeightSet};

pub type Dataset64 = Dataset<f64>;
pub type DesignMatrix64 = DesignMatrix<f64>;
pub type PsFit64 = PsFit<f64>;
pub type OrFit64 = OrFit<f64>;
pub type WeightSet64 = WeightSet<f64>;
pub type EstimateReport64 = EstimateReport<f64>;
pub type FitBundle64 = pipeline::FitBundle<f64>;
pub type InfluenceVector64 = wild::InfluenceVector<f64>;
pub type WildDraws64 = wild::WildDraws<f64>;
pub type ResampleDraws64 = resample::ResampleDraws<f64>;
pub type DiagnosticsReport64 = diagnostics::DiagnosticsReport<f64>;

pub type Dataset32 = Dataset<f32>;
pub type EstimateReport32 = EstimateReport<f32>;
