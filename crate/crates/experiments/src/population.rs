//! The simulated population, simple regression and point-estimate combining.

use pmse_core::baselines::Bounds;
use pmse_core::models::{GenerativeModel, SequentialGaussianModel};
use pmse_core::ThetaVector;
use pmse_core::{DataMatrix, PmseError};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

/// `x1 ~ N(2, 10²)`, `x2 | x1 ~ N(−2.5 + 0.5·x1, 3²)`.
pub const POPULATION_THETA: [f64; 5] = [2.0, 10.0, -2.5, 0.5, 3.0];

/// Draw `n` rows from the population.
pub fn simulate_population<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DataMatrix> {
    if n < 2 {
        return Err(PmseError::Domain(format!("population needs n >= 2, got {n}")).into());
    }
    let model = SequentialGaussianModel::new(n);
    Ok(model.sample(&ThetaVector::from_f64(&POPULATION_THETA), rng)?)
}

/// Marginal means and sds of the two population columns.
pub fn population_moments() -> ([f64; 2], [f64; 2]) {
    let [mu, s1, b0, b1, s2] = POPULATION_THETA;
    let mean2 = b0 + b1 * mu;
    let sd2 = (b1 * b1 * s1 * s1 + s2 * s2).sqrt();
    ([mu, mean2], [s1, sd2])
}

/// `mean ± k·sd` box around the population; fixed in advance, so it leaks
/// nothing about a particular sample.
pub fn population_bounds(k: f64) -> Result<Bounds<f64>> {
    let (means, sds) = population_moments();
    Ok(Bounds::centered(&means, &sds, k)?)
}

/// Intercept and slope of a simple regression of column 2 on column 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub beta0: f64,
    pub beta1: f64,
}

/// Closed-form OLS of column 2 on column 1.
pub fn ols_fit(x: &DataMatrix) -> Result<Coefficients> {
    if x.ncols() != 2 {
        return Err(ExperimentError::Config(format!(
            "regression needs 2 columns, got {}",
            x.ncols()
        )));
    }
    if x.nrows() < 3 {
        return Err(ExperimentError::DegenerateDesign(format!(
            "need at least 3 rows, got {}",
            x.nrows()
        )));
    }
    let n = x.nrows() as f64;
    let xbar = x.column(0).sum::<f64>() / n;
    let ybar = x.column(1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for row in x.rows() {
        let dx = row[0] - xbar;
        sxx += dx * dx;
        sxy += dx * (row[1] - ybar);
    }
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(ExperimentError::DegenerateDesign(
            "predictor has zero variance".into(),
        ));
    }
    let beta1 = sxy / sxx;
    Ok(Coefficients {
        beta0: ybar - beta1 * xbar,
        beta1,
    })
}

/// Mean of the per-dataset coefficients.
pub fn combine_estimates(per_dataset: &[Coefficients]) -> Result<Coefficients> {
    if per_dataset.is_empty() {
        return Err(PmseError::Domain("nothing to combine".into()).into());
    }
    let l = per_dataset.len() as f64;
    Ok(Coefficients {
        beta0: per_dataset.iter().map(|c| c.beta0).sum::<f64>() / l,
        beta1: per_dataset.iter().map(|c| c.beta1).sum::<f64>() / l,
    })
}

/// Combined coefficients plus the number of datasets whose predictor was
/// constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedFit {
    pub coefficients: Coefficients,
    pub degenerate: usize,
}

/// OLS on each dataset, then [`combine_estimates`]. A dataset with a
/// constant predictor contributes the intercept-only fit (`β1 = 0`,
/// `β0 = ȳ`).
pub fn combined_fit(datasets: &[DataMatrix]) -> Result<CombinedFit> {
    let mut degenerate = 0;
    let mut fits = Vec::with_capacity(datasets.len());
    for d in datasets {
        match ols_fit(d) {
            Ok(c) => fits.push(c),
            Err(ExperimentError::DegenerateDesign(_)) if d.nrows() >= 3 => {
                degenerate += 1;
                fits.push(Coefficients {
                    beta0: d.column(1).sum::<f64>() / d.nrows() as f64,
                    beta1: 0.0,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CombinedFit {
        coefficients: combine_estimates(&fits)?,
        degenerate,
    })
}
