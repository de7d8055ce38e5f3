//! Sequential-composition bookkeeping for pure ε-DP releases.

use serde::Serialize;

use crate::error::{PmseError, Result};

/// Slack allowed when the last of several equal shares lands on the total.
const ROUNDING_SLACK: f64 = 1e-12;

/// Tracks ε spent against a fixed total. Releases on the same data compose
/// additively.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyAccountant {
    total: f64,
    charges: Vec<f64>,
}

impl PrivacyAccountant {
    pub fn new(total: f64) -> Result<Self> {
        if !(total > 0.0) || !total.is_finite() {
            return Err(PmseError::Domain(format!(
                "epsilon must be positive, got {total}"
            )));
        }
        Ok(Self {
            total,
            charges: Vec::new(),
        })
    }

    /// Record one release at `epsilon`; refuses charges that would overrun the total.
    pub fn charge(&mut self, epsilon: f64) -> Result<()> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(PmseError::Domain(format!(
                "charge must be positive, got {epsilon}"
            )));
        }
        if self.spent() + epsilon > self.total * (1.0 + ROUNDING_SLACK) {
            return Err(PmseError::Domain(format!(
                "budget exhausted: spent {} of {}, cannot charge {epsilon}",
                self.spent(),
                self.total
            )));
        }
        self.charges.push(epsilon);
        Ok(())
    }

    pub fn spent(&self) -> f64 {
        self.charges.iter().sum()
    }

    pub fn remaining(&self) -> f64 {
        (self.total - self.spent()).max(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }
}

/// Per-release budget when `total` is split evenly over `parts` releases.
pub fn even_split(total: f64, parts: usize) -> Result<f64> {
    if parts == 0 {
        return Err(PmseError::Domain(
            "cannot split a budget into zero parts".into(),
        ));
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(PmseError::Domain(format!(
            "epsilon must be positive, got {total}"
        )));
    }
    Ok(total / parts as f64)
}
