//! Comparison synthesizers: noisy Bayesian posterior-predictive synthesis
//! with Laplace-perturbed sufficient statistics, the smooth histogram, and
//! the non-private posterior-predictive synthesizer.
//!
//! The posterior-predictive synthesizers target the two-column sequential
//! Gaussian model `x1 ~ N(μ, σ1²)`, `x2 | x1 ~ N(β0 + β1·x1, σ2²)` under the
//! usual diffuse (Jeffreys-type) priors.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Open01};
use rand::Rng;
use serde::Serialize;

use crate::dataset::DataMatrix;
use crate::error::{PmseError, Result};
use crate::models::{GenerativeModel, SequentialGaussianModel, ThetaVector};
use crate::scalar::Scalar;

/// Floor applied to noisy variances and sums of squares (per observation).
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Default bins per dimension for the smooth histogram.
pub const DEFAULT_BINS_PER_DIM: usize = 32;

/// Bound multipliers (in population standard deviations) used in the studies.
pub const BOUND_PRESETS: [f64; 4] = [2.0, 4.0, 5.0, 10.0];

/// Number of Laplace-perturbed statistics per noisy draw.
const NOISY_STATISTICS: usize = 5;

/// Per-column box `[lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bounds<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(PmseError::shape(
                "bounds",
                format!("{} upper limits", lower.len()),
                upper.len(),
            ));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(PmseError::Domain(format!(
                    "column {j}: lower bound {lo} must be below upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `mean_j ± k·sd_j` per column.
    pub fn centered(means: &[f64], sds: &[f64], k: f64) -> Result<Self> {
        if means.len() != sds.len() {
            return Err(PmseError::shape(
                "bounds",
                format!("{} sds", means.len()),
                sds.len(),
            ));
        }
        Self::new(
            means
                .iter()
                .zip(sds)
                .map(|(m, s)| T::lit(m - k * s))
                .collect(),
            means
                .iter()
                .zip(sds)
                .map(|(m, s)| T::lit(m + k * s))
                .collect(),
        )
    }

    pub fn ncols(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> T {
        self.upper[j] - self.lower[j]
    }

    pub fn volume(&self) -> T {
        (0..self.ncols()).fold(T::one(), |acc, j| acc * self.width(j))
    }

    pub fn contains(&self, x: &DataMatrix<T>) -> bool {
        x.ncols() == self.ncols()
            && x.rows().all(|row| {
                row.iter()
                    .enumerate()
                    .all(|(j, v)| *v >= self.lower[j] && *v <= self.upper[j])
            })
    }

    /// Truncate every entry into the box.
    pub fn clamp(&self, x: &DataMatrix<T>) -> Result<DataMatrix<T>> {
        self.check_width(x)?;
        x.map(|j, v| v.max(self.lower[j]).min(self.upper[j]))
    }

    fn check_width(&self, x: &DataMatrix<T>) -> Result<()> {
        if x.ncols() != self.ncols() {
            return Err(PmseError::shape(
                "bounds vs data columns",
                self.ncols(),
                x.ncols(),
            ));
        }
        Ok(())
    }
}

/// Zero-centred Laplace draw with the given scale, by inverse CDF.
pub fn laplace_noise<T: Scalar, R: Rng + ?Sized>(scale: T, rng: &mut R) -> Result<T> {
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(PmseError::Domain(format!(
            "Laplace scale must be positive, got {scale}"
        )));
    }
    // u uniform on the open interval (-1/2, 1/2) keeps the log finite.
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    let draw = -u.signum() * (-2.0 * u.abs()).ln_1p();
    Ok(scale * T::lit(draw))
}

/// Sufficient statistics of the sequential Gaussian model for columns
/// `(x, y)`: `Σx, Σx², Σy, Σy², Σxy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SufficientStats {
    pub n: usize,
    pub sums: [f64; NOISY_STATISTICS],
}

impl SufficientStats {
    pub fn from_data<T: Scalar>(x: &DataMatrix<T>) -> Result<Self> {
        if x.ncols() != 2 {
            return Err(PmseError::shape("sequential Gaussian data", 2, x.ncols()));
        }
        if x.nrows() < 3 {
            return Err(PmseError::Domain(format!(
                "need at least 3 rows, got {}",
                x.nrows()
            )));
        }
        let mut sums = [0.0; NOISY_STATISTICS];
        for row in x.rows() {
            let (a, b) = (row[0].as_f64(), row[1].as_f64());
            sums[0] += a;
            sums[1] += a * a;
            sums[2] += b;
            sums[3] += b * b;
            sums[4] += a * b;
        }
        Ok(Self { n: x.nrows(), sums })
    }

    /// How far each sum can move when one row is replaced by another row
    /// inside `bounds`.
    pub fn sensitivities<T: Scalar>(bounds: &Bounds<T>) -> Result<[f64; NOISY_STATISTICS]> {
        if bounds.ncols() != 2 {
            return Err(PmseError::shape(
                "bounds for sequential Gaussian data",
                2,
                bounds.ncols(),
            ));
        }
        let (xl, xh) = (bounds.lower[0].as_f64(), bounds.upper[0].as_f64());
        let (yl, yh) = (bounds.lower[1].as_f64(), bounds.upper[1].as_f64());
        let products = [xl * yl, xl * yh, xh * yl, xh * yh];
        let pmax = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pmin = products.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok([
            xh - xl,
            square_range(xl, xh),
            yh - yl,
            square_range(yl, yh),
            pmax - pmin,
        ])
    }

    /// Draw `θ = (μ, σ1, β0, β1, σ2)` from the posterior given these statistics.
    pub fn posterior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ThetaVector<f64> {
        let n = self.n as f64;
        let [sx, sxx_raw, sy, syy_raw, sxy_raw] = self.sums;
        let xbar = sx / n;
        let ybar = sy / n;
        let sxx = (sxx_raw - n * xbar * xbar).max(VARIANCE_FLOOR * n);
        let syy = syy_raw - n * ybar * ybar;
        let sxy = sxy_raw - n * xbar * ybar;
        let beta1_hat = sxy / sxx;
        let sse = (syy - beta1_hat * sxy).max(VARIANCE_FLOOR * n);

        let var1 = sxx / f64::chi_squared(n - 1.0, rng);
        let mu = xbar + (var1 / n).sqrt() * f64::standard_normal(rng);
        let var2 = sse / f64::chi_squared(n - 2.0, rng);
        let beta1 = beta1_hat + (var2 / sxx).sqrt() * f64::standard_normal(rng);
        let level = ybar + (var2 / n).sqrt() * f64::standard_normal(rng);
        ThetaVector(vec![
            mu,
            var1.max(VARIANCE_FLOOR).sqrt(),
            level - beta1 * xbar,
            beta1,
            var2.max(VARIANCE_FLOOR).sqrt(),
        ])
    }
}

/// Range of `v²` over `v ∈ [lo, hi]`.
fn square_range(lo: f64, hi: f64) -> f64 {
    let top = (lo * lo).max(hi * hi);
    let bottom = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        (lo * lo).min(hi * hi)
    };
    top - bottom
}

/// Laplace scales for one noisy draw at budget `eps_draw`, split evenly over
/// the five statistics.
pub fn noisy_bppd_scales<T: Scalar>(
    bounds: &Bounds<T>,
    eps_draw: f64,
) -> Result<[f64; NOISY_STATISTICS]> {
    if !(eps_draw > 0.0) {
        return Err(PmseError::Domain(format!(
            "epsilon must be positive, got {eps_draw}"
        )));
    }
    let share = eps_draw / NOISY_STATISTICS as f64;
    Ok(SufficientStats::sensitivities(bounds)?.map(|s| s / share))
}

/// `l` datasets, each from parameters drawn given Laplace-perturbed
/// statistics of the clamped data at budget `epsilon_total / l`. Output is
/// clamped to `bounds`.
pub fn noisy_bppd_synthesize<T: Scalar, R: Rng + ?Sized>(
    x: &DataMatrix<T>,
    bounds: &Bounds<T>,
    epsilon_total: f64,
    l: usize,
    rng: &mut R,
) -> Result<Vec<DataMatrix<T>>> {
    if l == 0 {
        return Err(PmseError::Domain("l must be >= 1".into()));
    }
    let eps_draw = epsilon_total / l as f64;
    let scales = noisy_bppd_scales(bounds, eps_draw)?;
    let clamped = bounds.clamp(x)?;
    let exact = SufficientStats::from_data(&clamped)?;
    let model =
        SequentialGaussianModel::new(x.nrows()).with_column_names(x.column_names().to_vec());
    (0..l)
        .map(|_| {
            let mut noisy = exact;
            for (s, scale) in noisy.sums.iter_mut().zip(scales) {
                *s += laplace_noise(scale, rng)?;
            }
            let theta = noisy.posterior_draw(rng);
            let synthetic = model.sample(&to_scalar_theta(&theta), rng)?;
            bounds.clamp(&synthetic)
        })
        .collect()
}

/// `l` datasets from parameters drawn from the exact-statistic posterior.
pub fn nondp_bppd_synthesize<T: Scalar, R: Rng + ?Sized>(
    x: &DataMatrix<T>,
    l: usize,
    rng: &mut R,
) -> Result<Vec<DataMatrix<T>>> {
    if l == 0 {
        return Err(PmseError::Domain("l must be >= 1".into()));
    }
    let stats = SufficientStats::from_data(x)?;
    let model =
        SequentialGaussianModel::new(x.nrows()).with_column_names(x.column_names().to_vec());
    (0..l)
        .map(|_| model.sample(&to_scalar_theta(&stats.posterior_draw(rng)), rng))
        .collect()
}

fn to_scalar_theta<T: Scalar>(theta: &ThetaVector<f64>) -> ThetaVector<T> {
    ThetaVector::from_f64(theta.as_slice())
}

/// Equal-width histogram over a box, mixed with the uniform density:
/// `(1 − λ)·f̂_K + λ·Ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothHistogram<T> {
    pub bounds: Bounds<T>,
    pub bins_per_dim: Vec<usize>,
    pub lambda: f64,
    /// Cell probabilities, first dimension varying slowest.
    pub probabilities: Vec<f64>,
    /// Unsmoothed cell frequencies `f̂_K`.
    pub empirical: Vec<f64>,
}

impl<T: Scalar> SmoothHistogram<T> {
    /// Total number of cells `K`.
    pub fn cells(&self) -> usize {
        self.bins_per_dim.iter().product()
    }

    /// Density `Ω` of the uniform component.
    pub fn omega(&self) -> f64 {
        1.0 / self.bounds.volume().as_f64()
    }

    /// Per-dimension bin indices of cell `k`.
    pub fn cell_coordinates(&self, mut k: usize) -> Vec<usize> {
        let mut coords = vec![0; self.bins_per_dim.len()];
        for (j, &b) in self.bins_per_dim.iter().enumerate().rev() {
            coords[j] = k % b;
            k /= b;
        }
        coords
    }

    /// Cell index holding `row`; values on the upper edge go to the last bin.
    pub fn cell_of(&self, row: &[T]) -> usize {
        let mut k = 0;
        for (j, &b) in self.bins_per_dim.iter().enumerate() {
            let rel = (row[j] - self.bounds.lower[j]) / self.bounds.width(j);
            let bin = (rel.as_f64() * b as f64).floor().max(0.0) as usize;
            k = k * b + bin.min(b - 1);
        }
        k
    }
}

/// Smoothing weight lower bound `K / (K + n·(e^{ε/n} − 1))`.
pub fn smoothing_lambda(cells: usize, n: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || n == 0 || cells == 0 {
        return Err(PmseError::Domain(format!(
            "smoothing weight needs epsilon > 0, n >= 1, K >= 1 (got {epsilon}, {n}, {cells})"
        )));
    }
    let k = cells as f64;
    let n = n as f64;
    Ok(k / (k + n * (epsilon / n).exp_m1()))
}

/// Fit the smoothed histogram at budget `epsilon` with `bins_per_dim` bins
/// in every dimension. The data must already lie inside `bounds`.
pub fn smooth_histogram_fit<T: Scalar>(
    x: &DataMatrix<T>,
    bounds: &Bounds<T>,
    bins_per_dim: usize,
    epsilon: f64,
) -> Result<SmoothHistogram<T>> {
    bounds.check_width(x)?;
    if bins_per_dim == 0 {
        return Err(PmseError::Domain("bins per dimension must be >= 1".into()));
    }
    if !bounds.contains(x) {
        return Err(PmseError::Domain(
            "data lie outside the bounds; truncate to the bounds before fitting".into(),
        ));
    }
    let q = x.ncols();
    let bins = vec![bins_per_dim; q];
    let cells = bins_per_dim
        .checked_pow(q as u32)
        .ok_or_else(|| PmseError::Resource(format!("{bins_per_dim}^{q} cells overflow")))?;
    let lambda = smoothing_lambda(cells, x.nrows(), epsilon)?;
    let mut hist = SmoothHistogram {
        bounds: bounds.clone(),
        bins_per_dim: bins,
        lambda,
        probabilities: vec![0.0; cells],
        empirical: vec![0.0; cells],
    };
    let mut counts = vec![0usize; cells];
    for row in x.rows() {
        counts[hist.cell_of(row)] += 1;
    }
    let n = x.nrows() as f64;
    let uniform = lambda / cells as f64;
    for ((p, e), c) in hist
        .probabilities
        .iter_mut()
        .zip(hist.empirical.iter_mut())
        .zip(counts)
    {
        *e = c as f64 / n;
        *p = (1.0 - lambda) * *e + uniform;
    }
    Ok(hist)
}

/// Draw `n_out` rows from the smoothed density. Each row comes from the
/// uniform component with probability `λ` and otherwise from a cell drawn by
/// empirical frequency, uniformly within the cell.
///
/// Random draws are consumed identically for histograms that share `λ`, so
/// the same seed couples samples across different bounds.
pub fn smooth_histogram_sample<T: Scalar, R: Rng + ?Sized>(
    h: &SmoothHistogram<T>,
    n_out: usize,
    rng: &mut R,
) -> Result<DataMatrix<T>> {
    let cells = WeightedIndex::new(&h.empirical)
        .map_err(|e| PmseError::Domain(format!("invalid histogram weights: {e}")))?;
    let q = h.bins_per_dim.len();
    let mut values = Vec::with_capacity(n_out * q);
    for _ in 0..n_out {
        let from_uniform = rng.random::<f64>() < h.lambda;
        let coords = if from_uniform {
            None
        } else {
            Some(h.cell_coordinates(cells.sample(rng)))
        };
        for j in 0..q {
            let u = T::unit_uniform(rng);
            let rel = match &coords {
                None => u,
                Some(c) => (T::from_count(c[j]) + u) / T::from_count(h.bins_per_dim[j]),
            };
            let v = h.bounds.lower[j] + h.bounds.width(j) * rel;
            values.push(v.min(h.bounds.upper[j]));
        }
    }
    DataMatrix::from_row_major(values, n_out, crate::dataset::default_column_names(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream_rng;

    #[test]
    fn lambda_matches_direct_formula() {
        let got = smoothing_lambda(4, 100, 1.0).unwrap();
        let direct = 4.0 / (4.0 + 100.0 * ((0.01f64).exp() - 1.0));
        assert!((got - direct).abs() < 1e-12);
        assert!((got - 0.7990).abs() < 1e-3);
    }

    #[test]
    fn laplace_rejects_non_positive_scale() {
        let mut rng = stream_rng(0, 0);
        assert!(laplace_noise(0.0f64, &mut rng).is_err());
        assert!(laplace_noise(-1.0f64, &mut rng).is_err());
    }

    #[test]
    fn square_range_handles_straddling_interval() {
        assert_eq!(square_range(-2.0, 3.0), 9.0);
        assert_eq!(square_range(1.0, 3.0), 8.0);
        assert_eq!(square_range(-3.0, -1.0), 8.0);
    }

    #[test]
    fn wider_bounds_give_larger_scales() {
        let b4 = Bounds::<f64>::centered(&[2.0, -1.5], &[10.0, 34f64.sqrt()], 4.0).unwrap();
        let b10 = Bounds::<f64>::centered(&[2.0, -1.5], &[10.0, 34f64.sqrt()], 10.0).unwrap();
        let s4 = noisy_bppd_scales(&b4, 0.1).unwrap();
        let s10 = noisy_bppd_scales(&b10, 0.1).unwrap();
        assert!(s4.iter().zip(&s10).all(|(a, b)| a < b));
    }

    #[test]
    fn outside_bounds_is_rejected() {
        let x = DataMatrix::from_unnamed_rows(&[vec![0.0, 0.0], vec![5.0, 0.0]]).unwrap();
        let b = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(smooth_histogram_fit(&x, &b, 4, 1.0).is_err());
        let h = smooth_histogram_fit(&b.clamp(&x).unwrap(), &b, 4, 1.0).unwrap();
        assert!((h.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_coordinates_invert_cell_index() {
        let b = Bounds::new(vec![0.0, 0.0], vec![4.0, 3.0]).unwrap();
        let x = DataMatrix::from_unnamed_rows(&[vec![3.5, 0.5], vec![4.0, 3.0]]).unwrap();
        let h = smooth_histogram_fit(&x, &b, 4, 1.0).unwrap();
        assert_eq!(h.cell_of(&[3.5, 0.5]), 12);
        assert_eq!(h.cell_coordinates(12), vec![3, 0]);
        assert_eq!(h.cell_of(&[4.0, 3.0]), 15);
    }

    #[test]
    fn bounds_reject_inverted_limits() {
        assert!(Bounds::new(vec![1.0], vec![1.0]).is_err());
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
    }
}
