//! How often greedy CART breaks the `1/n` pMSE sensitivity bound.

use std::collections::BTreeMap;

use pmse_core::cart::{fit_greedy_grown, FitConfig};
use pmse_core::dataset::{perturb_one_row, stack_and_label};
use pmse_core::models::{GenerativeModel, SequentialGaussianModel};
use pmse_core::{DataMatrix, Scalar, ThetaVector};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{Depth, ExperimentConfig, ExperimentKind};
use crate::error::{ExperimentError, Result};
use crate::population::simulate_population;
use crate::report::{Cell, ExperimentReport, Provenance};
use crate::seeds::{sim_rng, Stream};

/// Parameter vector with independent N(0, sd²) entries; scale entries are
/// reflected to be positive.
pub fn random_theta<R: Rng + ?Sized>(
    model: &SequentialGaussianModel,
    sd: f64,
    rng: &mut R,
) -> ThetaVector {
    let mut theta: Vec<f64> = (0..5).map(|_| sd * f64::standard_normal(rng)).collect();
    for &i in GenerativeModel::<f64>::scale_indices(model) {
        theta[i] = theta[i].abs().max(f64::MIN_POSITIVE);
    }
    ThetaVector::new(theta)
}

/// pMSE of `original` vs `synthetic` under every `(depth, cp)` cell, read
/// off one tree grown under the loosest settings.
fn cell_pmses(
    original: &DataMatrix,
    synthetic: &DataMatrix,
    cells: &[(Depth, f64)],
) -> Result<Vec<f64>> {
    let loosest = FitConfig::with_depth(
        cells.iter().map(|(d, _)| d.max_depth()).max(),
        cells
            .iter()
            .map(|(_, cp)| *cp)
            .fold(f64::INFINITY, f64::min),
    );
    let pool = stack_and_label(original, synthetic)?;
    let grown = fit_greedy_grown(&pool, &loosest)?;
    Ok(cells
        .iter()
        .map(|(d, cp)| {
            grown
                .prune(&FitConfig::with_depth(Some(d.max_depth()), *cp))
                .pmse_from_leaf_counts()
        })
        .collect())
}

/// Per-cell `|pMSE(X, Xˢ) − pMSE(X', Xˢ)|` for one simulation.
fn one_sim(cfg: &ExperimentConfig, cells: &[(Depth, f64)], sim: usize) -> Result<Vec<f64>> {
    let x = simulate_population(cfg.n, &mut sim_rng(cfg.seed, sim, Stream::Population))?;
    let mut rng = sim_rng(cfg.seed, sim, Stream::Perturb);
    let row = rng.random_range(0..cfg.n);
    let x_prime = perturb_one_row(&x, row, cfg.perturb_sd, &mut rng)?;
    let model = SequentialGaussianModel::new(cfg.n);
    let theta = random_theta(
        &model,
        cfg.theta_sd,
        &mut sim_rng(cfg.seed, sim, Stream::Theta),
    );
    let synthetic = model.sample(&theta, &mut sim_rng(cfg.seed, sim, Stream::Synthetic))?;
    let a = cell_pmses(&x, &synthetic, cells)?;
    let b = cell_pmses(&x_prime, &synthetic, cells)?;
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q).abs()).collect())
}

pub fn failure_rate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.experiment != ExperimentKind::FailureRate {
        return Err(ExperimentError::Config(format!(
            "expected failure-rate, got {}",
            cfg.experiment
        )));
    }
    cfg.validate()?;
    let cells: Vec<(Depth, f64)> = cfg
        .depths
        .iter()
        .flat_map(|d| cfg.cps.iter().map(move |cp| (*d, *cp)))
        .collect();
    let per_sim = (0..cfg.sims)
        .into_par_iter()
        .map(|sim| one_sim(cfg, &cells, sim))
        .collect::<Result<Vec<_>>>()?;
    let bound = 1.0 / cfg.n as f64;
    let report_cells = cells
        .iter()
        .enumerate()
        .map(|(k, (depth, cp))| {
            let deltas: Vec<f64> = per_sim.iter().map(|d| d[k]).collect();
            let raw = BTreeMap::from([("delta".to_string(), deltas)]);
            Cell::new("greedy-cart", format!("depth={depth},cp={cp}"), None, raw)
                .with_violations("delta", bound)
        })
        .collect();
    Ok(ExperimentReport {
        experiment: cfg.experiment,
        config: cfg.clone(),
        provenance: Provenance::new(cfg.seed, Vec::new()),
        cells: report_cells,
    })
}
