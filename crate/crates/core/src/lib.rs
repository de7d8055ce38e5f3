//! Differentially private synthetic data via the pMSE mechanism.
//!
//! Parameters of a generative model are drawn from an exponential-mechanism
//! density whose quality function is the expected propensity-score mean-squared
//! error (pMSE) of a CART classifier separating original from synthetic rows.
//! Synthetic datasets are then generated from the private parameters alone.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line tools use.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod accounting;
pub mod baselines;
pub mod cart;
pub mod dataset;
pub mod error;
pub mod mechanism;
pub mod models;
pub mod scalar;
pub mod seeding;
pub mod utility;

pub use error::{PmseError, Result};
pub use scalar::Scalar;

pub type DataMatrix = dataset::DataMatrix<f64>;
pub type DataMatrix32 = dataset::DataMatrix<f32>;
pub type LabeledPool = dataset::LabeledPool<f64>;
pub type DecisionTree = cart::DecisionTree<f64>;
pub type ThetaVector = models::ThetaVector<f64>;
pub type PmseValue = utility::PmseValue<f64>;
pub type UtilityEstimate = utility::UtilityEstimate<f64>;
pub type MechanismOutput = mechanism::MechanismOutput<f64>;
pub type Bounds = baselines::Bounds<f64>;
pub type SmoothHistogram = baselines::SmoothHistogram<f64>;
