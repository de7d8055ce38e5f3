//! Parametric synthesis models `g(θ)` and the diffuse prior placed on `θ`.
//!
//! Every scale parameter is read as a standard deviation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{default_column_names, DataMatrix};
use crate::error::{PmseError, Result};
use crate::scalar::Scalar;

/// Parameter vector of a generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaVector<T>(pub Vec<T>);

impl<T: Scalar> ThetaVector<T> {
    pub fn new(params: Vec<T>) -> Self {
        Self(params)
    }

    pub fn from_f64(params: &[f64]) -> Self {
        Self(params.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T> std::ops::Index<usize> for ThetaVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// A parametric generator of synthetic datasets.
///
/// `sample` sees only the parameters and a random source, so anything it
/// produces is a function of `θ` and the seed.
pub trait GenerativeModel<T: Scalar>: Sync {
    /// Length of `θ`.
    fn arity(&self) -> usize;

    /// Rows per generated dataset.
    fn n_out(&self) -> usize;

    /// Indices of `θ` that must be strictly positive.
    fn scale_indices(&self) -> &[usize];

    fn column_names(&self) -> Vec<String>;

    /// Check arity, finiteness and positivity of the scale parameters.
    fn validate(&self, theta: &ThetaVector<T>) -> Result<()> {
        if theta.len() != self.arity() {
            return Err(PmseError::ModelDomain(format!(
                "expected {} parameters, got {}",
                self.arity(),
                theta.len()
            )));
        }
        if !theta.is_finite() {
            return Err(PmseError::ModelDomain("non-finite parameter".into()));
        }
        for &i in self.scale_indices() {
            if !(theta[i] > T::zero()) {
                return Err(PmseError::ModelDomain(format!(
                    "scale parameter {} must be positive, got {}",
                    i + 1,
                    theta[i]
                )));
            }
        }
        Ok(())
    }

    /// Draw one dataset of `n_out` rows.
    fn sample<R: Rng + ?Sized>(&self, theta: &ThetaVector<T>, rng: &mut R)
        -> Result<DataMatrix<T>>;
}

/// Two-column sequential Gaussian model:
/// `x1 ~ N(θ1, θ2²)`, `x2 | x1 ~ N(θ3 + θ4·x1, θ5²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialGaussianModel {
    n_out: usize,
    column_names: Vec<String>,
}

impl SequentialGaussianModel {
    pub fn new(n_out: usize) -> Self {
        Self {
            n_out,
            column_names: default_column_names(2),
        }
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), 2, "sequential Gaussian model has two columns");
        self.column_names = names;
        self
    }
}

impl<T: Scalar> GenerativeModel<T> for SequentialGaussianModel {
    fn arity(&self) -> usize {
        5
    }

    fn n_out(&self) -> usize {
        self.n_out
    }

    fn scale_indices(&self) -> &[usize] {
        &[1, 4]
    }

    fn column_names(&self) -> Vec<String> {
        self.column_names.clone()
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        theta: &ThetaVector<T>,
        rng: &mut R,
    ) -> Result<DataMatrix<T>> {
        self.validate(theta)?;
        let t = theta.as_slice();
        let mut values = Vec::with_capacity(2 * self.n_out);
        for _ in 0..self.n_out {
            let x1 = t[0] + t[1] * T::standard_normal(rng);
            let x2 = t[2] + t[3] * x1 + t[4] * T::standard_normal(rng);
            values.push(x1);
            values.push(x2);
        }
        DataMatrix::from_row_major(values, self.n_out, self.column_names.clone())
    }
}

/// Independent N(0, sd²) prior on every parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatPrior {
    pub sd: f64,
}

impl Default for FlatPrior {
    fn default() -> Self {
        Self { sd: 100_000.0 }
    }
}

impl FlatPrior {
    pub fn from_sd(sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(PmseError::Domain(format!(
                "prior sd must be positive, got {sd}"
            )));
        }
        Ok(Self { sd })
    }

    /// Read the prior's second argument as a variance instead.
    pub fn from_variance(variance: f64) -> Result<Self> {
        Self::from_sd(variance.sqrt())
    }

    /// Sum of per-component Gaussian log-densities.
    pub fn log_density<T: Scalar>(&self, theta: &ThetaVector<T>) -> f64 {
        let norm = -0.5 * (2.0 * std::f64::consts::PI * self.sd * self.sd).ln();
        theta
            .as_slice()
            .iter()
            .map(|v| {
                let z = v.as_f64() / self.sd;
                norm - 0.5 * z * z
            })
            .sum()
    }
}

/// Free-function form of [`FlatPrior::log_density`].
pub fn log_prior<T: Scalar>(prior: &FlatPrior, theta: &ThetaVector<T>) -> f64 {
    prior.log_density(theta)
}

/// Draw a dataset from `model` at `theta` with the given random source.
pub fn sample_synthetic<T: Scalar, M: GenerativeModel<T>, R: Rng + ?Sized>(
    model: &M,
    theta: &ThetaVector<T>,
    rng: &mut R,
) -> Result<DataMatrix<T>> {
    model.sample(theta, rng)
}
