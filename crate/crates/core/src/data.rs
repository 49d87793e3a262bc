//! Datasets, design matrices and model specifications.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Observed sample: outcome, binary treatment and named covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    outcome: Array1<T>,
    treatment: Vec<bool>,
    covariates: Array2<T>,
    names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        outcome: Array1<T>,
        treatment: Vec<bool>,
        covariates: Array2<T>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = outcome.len();
        if treatment.len() != n || covariates.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "length mismatch: outcome {n}, treatment {}, covariate rows {}",
                treatment.len(),
                covariates.nrows()
            )));
        }
        if covariates.ncols() != names.len() {
            return Err(Error::InvalidInput(
                "covariate names do not match columns".into(),
            ));
        }
        if outcome
            .iter()
            .chain(covariates.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidInput("non-finite value in data".into()));
        }
        Ok(Dataset {
            outcome,
            treatment,
            covariates,
            names,
        })
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn outcome(&self) -> ArrayView1<'_, T> {
        self.outcome.view()
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    /// Treatment as 0/1 reals.
    pub fn z(&self) -> Array1<T> {
        self.treatment
            .iter()
            .map(|&t| if t { T::one() } else { T::zero() })
            .collect()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated()
    }

    pub fn covariates(&self) -> &Array2<T> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<ArrayView1<'_, T>> {
        let j = self
            .names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        Ok(self.covariates.column(j))
    }

    /// Intercept plus the named covariate columns, in the given order.
    pub fn design(&self, columns: &[String]) -> Result<DesignMatrix<T>> {
        let n = self.len();
        let mut values = Array2::<T>::ones((n, columns.len() + 1));
        for (k, name) in columns.iter().enumerate() {
            values.column_mut(k + 1).assign(&self.column(name)?);
        }
        let mut names = Vec::with_capacity(columns.len() + 1);
        names.push("(Intercept)".to_string());
        names.extend(columns.iter().cloned());
        DesignMatrix::new(values, names, true)
    }

    /// Rows at the given indices (with repetition), in order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset<T> {
        Dataset {
            outcome: self.outcome.select(Axis(0), idx),
            treatment: idx.iter().map(|&i| self.treatment[i]).collect(),
            covariates: self.covariates.select(Axis(0), idx),
            names: self.names.clone(),
        }
    }

    /// Same data with the outcome replaced.
    pub fn with_outcome(&self, outcome: Array1<T>) -> Result<Dataset<T>> {
        Dataset::new(
            outcome,
            self.treatment.clone(),
            self.covariates.clone(),
            self.names.clone(),
        )
    }
}

/// Model matrix with an optional leading column of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    values: Array2<T>,
    column_names: Vec<String>,
    has_intercept: bool,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn new(values: Array2<T>, column_names: Vec<String>, has_intercept: bool) -> Result<Self> {
        let (n, cols) = values.dim();
        if column_names.len() != cols {
            return Err(Error::InvalidInput(
                "design column names do not match".into(),
            ));
        }
        if cols == 0 {
            return Err(Error::InvalidInput("design has no columns".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in design".into()));
        }
        if has_intercept && values.column(0).iter().any(|&x| x != T::one()) {
            return Err(Error::InvalidInput(
                "intercept column is not identically 1".into(),
            ));
        }
        if n < cols + 1 {
            return Err(Error::InvalidInput(format!(
                "{n} rows cannot support {cols} columns"
            )));
        }
        Ok(DesignMatrix {
            values,
            column_names,
            has_intercept,
        })
    }

    pub fn intercept_only(n: usize) -> Result<Self> {
        Self::new(Array2::ones((n, 1)), vec!["(Intercept)".into()], true)
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.values.row(i)
    }
}

/// Which covariates enter the propensity (V) and outcome (W) designs.
/// Both designs always carry an intercept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub ps_columns: Vec<String>,
    pub or_columns: Vec<String>,
    /// Free-form tag for reports, e.g. `ps+or`.
    pub label: String,
}

impl ModelSpec {
    pub fn new(ps_columns: Vec<String>, or_columns: Vec<String>) -> Self {
        ModelSpec {
            ps_columns,
            or_columns,
            label: String::new(),
        }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}
