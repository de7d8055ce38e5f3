//! Release synthetic copies of a CSV dataset through the mechanism.

use std::path::{Path, PathBuf};

use pmse_core::dataset::{read_csv, to_csv_string};
use pmse_core::mechanism::{run_mechanism, ChainConfig, ChainDiagnostics, MechanismConfig};
use pmse_core::models::{FlatPrior, SequentialGaussianModel};
use pmse_core::seeding::stream_rng;
use pmse_core::{DataMatrix, ThetaVector};
use serde::{Deserialize, Serialize};

use crate::config::{default_chain, merge, read_json_object, Depth};
use crate::error::{ExperimentError, Result};
use crate::report::write_file;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeConfig {
    /// Two-column headered CSV.
    pub input: Option<PathBuf>,
    pub epsilon: f64,
    pub l: usize,
    pub m: usize,
    pub depth: Depth,
    pub cp: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub prior_sd: f64,
    pub chain: ChainConfig,
}

impl Default for SynthesizeConfig {
    fn default() -> Self {
        Self {
            input: None,
            epsilon: 1.0,
            l: 10,
            m: 20,
            depth: Depth::Unlimited,
            cp: 0.01,
            seed: 0,
            output: None,
            prior_sd: 100_000.0,
            chain: default_chain(),
        }
    }
}

impl SynthesizeConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let defaults = serde_json::to_value(Self::default()).expect("config serializes");
        serde_json::from_value(merge(defaults, read_json_object(path)?)).map_err(|source| {
            ExperimentError::Json {
                path: path.to_path_buf(),
                source,
            }
        })
    }

    pub fn mechanism(&self) -> MechanismConfig {
        MechanismConfig {
            epsilon_total: self.epsilon,
            num_datasets: self.l,
            replicates_m: self.m,
            delta_u: None,
            prior: FlatPrior { sd: self.prior_sd },
            chain: self.chain.clone(),
            fitter: self.depth.fitter(self.cp),
        }
    }
}

/// Everything released besides the datasets themselves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleaseSummary {
    pub config: SynthesizeConfig,
    pub thetas: Vec<ThetaVector>,
    pub epsilon_spent: f64,
    pub per_draw_epsilon: f64,
    pub delta_u: f64,
    pub synthesis_seeds: Vec<u64>,
    pub diagnostics: Vec<ChainDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Release {
    pub summary: ReleaseSummary,
    pub datasets: Vec<DataMatrix>,
}

pub fn synthesize(cfg: &SynthesizeConfig, x: &DataMatrix) -> Result<Release> {
    if x.ncols() != 2 {
        return Err(ExperimentError::Config(format!(
            "the sequential Gaussian model needs 2 columns, input has {}",
            x.ncols()
        )));
    }
    let mcfg = cfg.mechanism();
    let model =
        SequentialGaussianModel::new(x.nrows()).with_column_names(x.column_names().to_vec());
    let out = run_mechanism(x, &model, &mcfg, &mut stream_rng(cfg.seed, 0))?;
    Ok(Release {
        summary: ReleaseSummary {
            config: cfg.clone(),
            thetas: out.thetas,
            epsilon_spent: out.epsilon_spent,
            per_draw_epsilon: out.per_draw_epsilon,
            delta_u: out.delta_u,
            synthesis_seeds: out.synthesis_seeds,
            diagnostics: out.diagnostics,
        },
        datasets: out.datasets,
    })
}

/// Read the input, run the mechanism and write `synthetic_<i>.csv`
/// (1-based) plus `release.json` into `dir`.
pub fn synthesize_to_dir(cfg: &SynthesizeConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("no input CSV given".into()))?;
    let x = read_csv::<f64>(input)?;
    let release = synthesize(cfg, &x)?;
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(release.datasets.len() + 1);
    for (i, d) in release.datasets.iter().enumerate() {
        let path = dir.join(format!("synthetic_{}.csv", i + 1));
        write_file(&path, to_csv_string(d).as_bytes())?;
        written.push(path);
    }
    let path = dir.join("release.json");
    let text =
        serde_json::to_string_pretty(&release.summary).map_err(|source| ExperimentError::Json {
            path: path.clone(),
            source,
        })?;
    write_file(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}
