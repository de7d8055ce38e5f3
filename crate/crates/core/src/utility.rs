//! Propensity-score mean-squared error and the replicate-averaged quality
//! function built on it.

use rand::Rng;

use crate::cart::{fit_greedy_stacked, PresortedBlock, TreeFitter};
use crate::dataset::{stack_and_label, DataMatrix};
use crate::error::{PmseError, Result};
use crate::models::{GenerativeModel, ThetaVector};
use crate::scalar::Scalar;
use crate::seeding::stream_rng;

/// A pMSE value, always in `[0, 0.25]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PmseValue<T>(T);

impl<T: Scalar> PmseValue<T> {
    /// Clamp rounding excursions back into `[0, 0.25]`.
    pub fn new(value: T) -> Self {
        debug_assert!(value.is_finite());
        PmseValue(value.max(T::zero()).min(T::lit(0.25)))
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Mean pMSE over `m` synthetic replicates at one `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityEstimate<T> {
    pub mean_pmse: PmseValue<T>,
    pub per_replicate: Vec<PmseValue<T>>,
}

impl<T: Scalar> UtilityEstimate<T> {
    fn from_replicates(per_replicate: Vec<PmseValue<T>>) -> Self {
        let sum = per_replicate
            .iter()
            .fold(T::zero(), |acc, p| acc + p.value());
        let mean = sum / T::from_count(per_replicate.len());
        Self {
            mean_pmse: PmseValue::new(mean),
            per_replicate,
        }
    }

    pub fn replicate_count(&self) -> usize {
        self.per_replicate.len()
    }
}

/// Stack, label, fit, predict and average `(p̂ - 1/2)²` over all `2n` rows.
pub fn compute_pmse<T: Scalar>(
    original: &DataMatrix<T>,
    synthetic: &DataMatrix<T>,
    fitter: &TreeFitter,
) -> Result<PmseValue<T>> {
    let pool = stack_and_label(original, synthetic)?;
    let tree = fitter.fit(&pool)?;
    let half = T::lit(0.5);
    let sum = tree
        .predict_proba(pool.predictors())
        .into_iter()
        .fold(T::zero(), |acc, p| acc + (p - half) * (p - half));
    Ok(PmseValue::new(sum / T::from_count(pool.len())))
}

/// pMSE against one fixed original dataset, for many synthetic datasets.
///
/// With a greedy fitter the original block is sorted once and merged with
/// each synthetic block, and the pMSE is read off the leaf counts; results
/// match [`compute_pmse`] up to floating-point rounding.
#[derive(Debug, Clone)]
pub struct PmseEvaluator<'a, T> {
    original: &'a DataMatrix<T>,
    presorted: Option<PresortedBlock<T>>,
    fitter: TreeFitter,
}

impl<'a, T: Scalar> PmseEvaluator<'a, T> {
    pub fn new(original: &'a DataMatrix<T>, fitter: &TreeFitter) -> Self {
        let presorted = match fitter {
            TreeFitter::Greedy(_) => Some(PresortedBlock::new(original)),
            TreeFitter::Exact { .. } => None,
        };
        Self {
            original,
            presorted,
            fitter: *fitter,
        }
    }

    pub fn original(&self) -> &DataMatrix<T> {
        self.original
    }

    pub fn pmse(&self, synthetic: &DataMatrix<T>) -> Result<PmseValue<T>> {
        match (&self.fitter, &self.presorted) {
            (TreeFitter::Greedy(cfg), Some(block)) => {
                if !self.original.same_shape(synthetic) {
                    return Err(PmseError::shape(
                        "stack_and_label",
                        format!("{}x{}", self.original.nrows(), self.original.ncols()),
                        format!("{}x{}", synthetic.nrows(), synthetic.ncols()),
                    ));
                }
                let tree = fit_greedy_stacked(block, synthetic, cfg)?;
                Ok(PmseValue::new(tree.pmse_from_leaf_counts()))
            }
            _ => compute_pmse(self.original, synthetic, &self.fitter),
        }
    }

    /// `u(X, θ)` from `m` replicates on streams `0..m` of `base`.
    pub fn utility_from_seed<M: GenerativeModel<T>>(
        &self,
        theta: &ThetaVector<T>,
        model: &M,
        m: usize,
        base: u64,
    ) -> Result<UtilityEstimate<T>> {
        if m == 0 {
            return Err(PmseError::Domain("replicate count m must be >= 1".into()));
        }
        model.validate(theta)?;
        let per_replicate = (0..m as u64)
            .map(|r| {
                let synthetic = model.sample(theta, &mut stream_rng(base, r))?;
                self.pmse(&synthetic)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UtilityEstimate::from_replicates(per_replicate))
    }
}

/// Estimate `u(X, θ)` as the mean pMSE of `m` datasets drawn from `g(θ)`.
///
/// One base seed is taken from `rng`; replicate `r` is generated from stream
/// `r` of that seed, so the result does not depend on evaluation order.
pub fn utility<T, M, R>(
    original: &DataMatrix<T>,
    theta: &ThetaVector<T>,
    model: &M,
    m: usize,
    fitter: &TreeFitter,
    rng: &mut R,
) -> Result<UtilityEstimate<T>>
where
    T: Scalar,
    M: GenerativeModel<T>,
    R: Rng + ?Sized,
{
    let base = rng.next_u64();
    utility_from_seed(original, theta, model, m, fitter, base)
}

/// [`utility`] with an explicit base seed.
pub fn utility_from_seed<T, M>(
    original: &DataMatrix<T>,
    theta: &ThetaVector<T>,
    model: &M,
    m: usize,
    fitter: &TreeFitter,
    base: u64,
) -> Result<UtilityEstimate<T>>
where
    T: Scalar,
    M: GenerativeModel<T>,
{
    PmseEvaluator::new(original, fitter).utility_from_seed(theta, model, m, base)
}

/// `|u(X, θ) - u(X', θ)|` with both estimates using the same synthetic replicates.
pub fn sensitivity_delta<T, M, R>(
    x: &DataMatrix<T>,
    x_prime: &DataMatrix<T>,
    theta: &ThetaVector<T>,
    model: &M,
    m: usize,
    fitter: &TreeFitter,
    rng: &mut R,
) -> Result<T>
where
    T: Scalar,
    M: GenerativeModel<T>,
    R: Rng + ?Sized,
{
    if !x.same_shape(x_prime) {
        return Err(PmseError::shape(
            "neighbouring datasets",
            format!("{}x{}", x.nrows(), x.ncols()),
            format!("{}x{}", x_prime.nrows(), x_prime.ncols()),
        ));
    }
    let base = rng.next_u64();
    let u = utility_from_seed(x, theta, model, m, fitter, base)?;
    let u_prime = utility_from_seed(x_prime, theta, model, m, fitter, base)?;
    Ok((u.mean_pmse.value() - u_prime.mean_pmse.value()).abs())
}

/// Sensitivity bound `1/n` for optimally fitted trees.
pub fn sensitivity_bound(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(PmseError::Domain("sensitivity bound needs n >= 1".into()));
    }
    Ok(1.0 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cart::FitConfig;
    use crate::models::SequentialGaussianModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn col(xs: &[f64]) -> DataMatrix<f64> {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        DataMatrix::from_unnamed_rows(&rows).unwrap()
    }

    #[test]
    fn unsplittable_pool_gives_zero() {
        let x = col(&[1.0, 2.0, 3.0]);
        let s = col(&[1.5, 2.5, 3.5]);
        let fitter = TreeFitter::Greedy(FitConfig::with_depth(None, 1.0));
        assert_eq!(compute_pmse(&x, &s, &fitter).unwrap().value(), 0.0);
    }

    #[test]
    fn separable_blocks_give_quarter() {
        let x = col(&[1.0, 2.0, 3.0]);
        let s = col(&[10.0, 11.0, 12.0]);
        let fitter = TreeFitter::Greedy(FitConfig::with_depth(Some(1), 0.0));
        assert_eq!(compute_pmse(&x, &s, &fitter).unwrap().value(), 0.25);
    }

    #[test]
    fn two_thirds_one_third_leaves() {
        // Original {3, 4, 5}, synthetic {1, 2, 6}; with three rows per leaf the
        // only split is at 3.5, giving leaves (a=2, m=3) and (a=1, m=3).
        let x = col(&[3.0, 4.0, 5.0]);
        let s = col(&[1.0, 2.0, 6.0]);
        let fitter = TreeFitter::Greedy(FitConfig {
            max_depth: Some(1),
            cp: 0.0,
            min_leaf: 3,
            ..FitConfig::default()
        });
        let got = compute_pmse(&x, &s, &fitter).unwrap().value();
        let expected =
            (3.0 * (2.0f64 / 3.0 - 0.5).powi(2) + 3.0 * (1.0f64 / 3.0 - 0.5).powi(2)) / 6.0;
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 1.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn bound_is_reciprocal() {
        assert_eq!(sensitivity_bound(5000).unwrap(), 0.0002);
        assert_eq!(sensitivity_bound(1).unwrap(), 1.0);
        assert_eq!(sensitivity_bound(100).unwrap(), 0.01);
        assert!(sensitivity_bound(0).is_err());
    }

    #[test]
    fn single_replicate_mean_equals_replicate() {
        let model = SequentialGaussianModel::new(30);
        let theta = ThetaVector::<f64>::from_f64(&[0.0, 1.0, 0.0, 0.0, 1.0]);
        let x = model
            .sample(&theta, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let fitter = TreeFitter::Greedy(FitConfig::with_depth(Some(3), 0.0));
        let u = utility(
            &x,
            &theta,
            &model,
            1,
            &fitter,
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        assert_eq!(u.replicate_count(), 1);
        assert_eq!(u.mean_pmse, u.per_replicate[0]);
    }

    #[test]
    fn invalid_theta_is_model_domain_error() {
        let model = SequentialGaussianModel::new(10);
        let x = col(&[1.0; 10]);
        let theta = ThetaVector::<f64>::from_f64(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let err = utility(
            &x,
            &theta,
            &model,
            2,
            &TreeFitter::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap_err();
        assert!(matches!(err, PmseError::ModelDomain(_)));
    }

    #[test]
    fn identical_inputs_have_zero_delta() {
        let model = SequentialGaussianModel::new(40);
        let theta = ThetaVector::<f64>::from_f64(&[0.0, 1.0, 0.0, 0.5, 1.0]);
        let x = model
            .sample(&theta, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let fitter = TreeFitter::Greedy(FitConfig::with_depth(None, 0.001));
        let d = sensitivity_delta(
            &x,
            &x,
            &theta,
            &model,
            3,
            &fitter,
            &mut ChaCha8Rng::seed_from_u64(6),
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }
}
