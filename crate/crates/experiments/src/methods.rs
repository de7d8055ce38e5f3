//! The synthesizers compared by the evaluation studies, as cells that turn
//! one simulated dataset into synthetic datasets.

use pmse_core::baselines::{
    noisy_bppd_synthesize, nondp_bppd_synthesize, smooth_histogram_fit, smooth_histogram_sample,
};
use pmse_core::mechanism::{
    draw_seeds, metropolis_sample, run_mechanism, synthesize_from_theta, MechanismConfig,
};
use pmse_core::models::{FlatPrior, SequentialGaussianModel};
use pmse_core::DataMatrix;
use rand::RngCore;

use crate::config::{Depth, ExperimentConfig, Method};
use crate::error::Result;
use crate::population::population_bounds;
use crate::seeds::{sim_rng, Stream};

/// Which variant of a method a cell runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Tree { depth: Depth, cp: f64 },
    Bounds(f64),
    Plain,
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Tree { depth, cp } => format!("depth={depth},cp={cp}"),
            Variant::Bounds(k) => format!("bounds={k}sd"),
            Variant::Plain => "none".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpec {
    pub method: Method,
    pub variant: Variant,
    pub epsilon: f64,
}

/// Cells in report order: method, then variant, then ε.
pub fn cell_specs(cfg: &ExperimentConfig) -> Vec<CellSpec> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        let variants: Vec<Variant> = match method {
            Method::PmseMech => cfg
                .depths
                .iter()
                .flat_map(|&depth| cfg.cps.iter().map(move |&cp| Variant::Tree { depth, cp }))
                .collect(),
            Method::NoisyBppd | Method::SmoothHist => {
                cfg.bounds.iter().map(|&k| Variant::Bounds(k)).collect()
            }
            Method::NondpBppd => vec![Variant::Plain],
        };
        for variant in variants {
            for &epsilon in &cfg.epsilons {
                out.push(CellSpec {
                    method,
                    variant,
                    epsilon,
                });
            }
        }
    }
    out
}

pub fn mechanism_config(
    cfg: &ExperimentConfig,
    epsilon: f64,
    depth: Depth,
    cp: f64,
) -> MechanismConfig {
    MechanismConfig {
        epsilon_total: epsilon,
        num_datasets: cfg.l,
        replicates_m: cfg.m,
        delta_u: None,
        prior: FlatPrior { sd: cfg.prior_sd },
        chain: cfg.chain.clone(),
        fitter: depth.fitter(cp),
    }
}

/// Synthetic data for one cell of simulation `sim`.
///
/// With `all_draws` every one of the `l` datasets is produced (each DP
/// synthesizer spends ε in total across them). Otherwise only the first is:
/// for the mechanism this is the first chain of a full run at `ε/l` per
/// draw, and for the histogram a single sample at full ε.
pub fn synthesize_cell(
    cfg: &ExperimentConfig,
    spec: &CellSpec,
    x: &DataMatrix,
    sim: usize,
    all_draws: bool,
) -> Result<Vec<DataMatrix>> {
    let l = if all_draws { cfg.l } else { 1 };
    let datasets = match (spec.method, spec.variant) {
        (Method::PmseMech, Variant::Tree { depth, cp }) => {
            let mcfg = mechanism_config(cfg, spec.epsilon, depth, cp);
            let model = SequentialGaussianModel::new(x.nrows())
                .with_column_names(x.column_names().to_vec());
            let mut rng = sim_rng(cfg.seed, sim, Stream::Mechanism);
            if all_draws {
                run_mechanism(x, &model, &mcfg, &mut rng)?.datasets
            } else {
                let (chain_seed, synth_seed) = draw_seeds(rng.next_u64(), 0);
                let (theta, _) =
                    metropolis_sample(x, &model, mcfg.per_draw_epsilon()?, &mcfg, chain_seed)?;
                vec![synthesize_from_theta(&model, &theta, synth_seed)?]
            }
        }
        (Method::NoisyBppd, Variant::Bounds(k)) => {
            let bounds = population_bounds(k)?;
            let mut rng = sim_rng(cfg.seed, sim, Stream::NoisyBppd);
            let mut all = noisy_bppd_synthesize(x, &bounds, spec.epsilon, cfg.l, &mut rng)?;
            all.truncate(l);
            all
        }
        (Method::SmoothHist, Variant::Bounds(k)) => {
            let bounds = population_bounds(k)?;
            let hist =
                smooth_histogram_fit(&bounds.clamp(x)?, &bounds, cfg.bins_per_dim, spec.epsilon)?;
            let mut rng = sim_rng(cfg.seed, sim, Stream::SmoothHist);
            (0..l)
                .map(|_| smooth_histogram_sample(&hist, x.nrows(), &mut rng))
                .collect::<pmse_core::Result<Vec<_>>>()?
        }
        (Method::NondpBppd, _) => {
            nondp_bppd_synthesize(x, l, &mut sim_rng(cfg.seed, sim, Stream::NondpBppd))?
        }
        (method, variant) => unreachable!("{method} has no variant {variant:?}"),
    };
    Ok(datasets)
}
