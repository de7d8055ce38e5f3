//! Experiment configuration: per-experiment defaults, JSON files and
//! validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pmse_core::baselines::DEFAULT_BINS_PER_DIM;
use pmse_core::cart::{FitConfig, TreeFitter};
use pmse_core::mechanism::{Anneal, ChainConfig, ReplicateSeeds};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ExperimentError, Result};

/// Depth limit used for "unlimited" trees; `cp` is the live stopping rule.
pub const UNLIMITED_DEPTH_CAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FailureRate,
    RegressEval,
    PmseEval,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FailureRate => "failure-rate",
            ExperimentKind::RegressEval => "regress-eval",
            ExperimentKind::PmseEval => "pmse-eval",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Synthesizers compared in the evaluation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PmseMech,
    NoisyBppd,
    SmoothHist,
    NondpBppd,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PmseMech,
        Method::NoisyBppd,
        Method::SmoothHist,
        Method::NondpBppd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PmseMech => "pmse-mech",
            Method::NoisyBppd => "noisy-bppd",
            Method::SmoothHist => "smooth-hist",
            Method::NondpBppd => "nondp-bppd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// Tree depth limit; written as a number or `"unlimited"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Depth {
    Limited(usize),
    Unlimited,
}

impl Depth {
    pub fn max_depth(self) -> usize {
        match self {
            Depth::Limited(d) => d,
            Depth::Unlimited => UNLIMITED_DEPTH_CAP,
        }
    }

    /// Greedy CART with this depth limit and `cp`.
    pub fn fitter(self, cp: f64) -> TreeFitter {
        TreeFitter::Greedy(FitConfig::with_depth(Some(self.max_depth()), cp))
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Limited(d) => write!(f, "{d}"),
            Depth::Unlimited => f.write_str("unlimited"),
        }
    }
}

impl FromStr for Depth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("unlimited") {
            return Ok(Depth::Unlimited);
        }
        match s.parse::<usize>() {
            Ok(d) if d >= 1 => Ok(Depth::Limited(d)),
            _ => Err(format!(
                "depth must be a positive integer or \"unlimited\", got {s:?}"
            )),
        }
    }
}

impl Serialize for Depth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Depth::Limited(d) => s.serialize_u64(*d as u64),
            Depth::Unlimited => s.serialize_str("unlimited"),
        }
    }
}

impl<'de> Deserialize<'de> for Depth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(usize),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(n) => n.to_string().parse(),
            Repr::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Rows in each simulated original dataset.
    pub n: usize,
    pub sims: usize,
    pub epsilons: Vec<f64>,
    /// Failure rate: trees evaluated. Evaluation studies: trees inside the mechanism.
    pub depths: Vec<Depth>,
    /// Failure rate: cp per cell. Evaluation studies: cp inside the mechanism.
    pub cps: Vec<f64>,
    /// Bound multipliers, in population sds, for the bounded baselines.
    pub bounds: Vec<f64>,
    /// Datasets released per run.
    pub l: usize,
    /// Synthetic replicates per utility evaluation.
    pub m: usize,
    pub seed: u64,
    /// Output directory.
    pub output: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Tree used to score synthetic data in the pMSE study.
    pub eval_depth: Depth,
    pub eval_cp: f64,
    pub bins_per_dim: usize,
    /// Failure rate: sd of the noise added to the perturbed row.
    pub perturb_sd: f64,
    /// Failure rate: sd of the N(0, sd²) draw of each synthesis parameter.
    pub theta_sd: f64,
    /// Sd of the mechanism's Gaussian prior.
    pub prior_sd: f64,
    pub chain: ChainConfig,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            n: 5000,
            sims: 250,
            epsilons: vec![0.25, 0.5, 1.0],
            depths: vec![
                Depth::Limited(1),
                Depth::Limited(2),
                Depth::Limited(5),
                Depth::Unlimited,
            ],
            cps: vec![0.01],
            bounds: vec![2.0, 4.0, 5.0, 10.0],
            l: 10,
            m: 1,
            seed: 0,
            output: None,
            methods: Method::ALL.to_vec(),
            eval_depth: Depth::Unlimited,
            eval_cp: 0.001,
            bins_per_dim: DEFAULT_BINS_PER_DIM,
            perturb_sd: 25.0,
            theta_sd: 10.0,
            prior_sd: 100_000.0,
            chain: study_chain(),
        };
        match kind {
            ExperimentKind::FailureRate => Self {
                sims: 10_000,
                epsilons: Vec::new(),
                depths: vec![
                    Depth::Limited(1),
                    Depth::Limited(2),
                    Depth::Limited(5),
                    Depth::Unlimited,
                ],
                cps: vec![0.01, 0.001],
                bounds: Vec::new(),
                l: 1,
                m: 1,
                methods: Vec::new(),
                ..base
            },
            ExperimentKind::RegressEval => base,
            ExperimentKind::PmseEval => Self {
                epsilons: vec![0.25, 0.5, 1.0, 2.0, 4.0],
                depths: vec![Depth::Unlimited],
                cps: vec![0.001],
                bounds: vec![4.0],
                ..base
            },
        }
    }

    /// Defaults for `kind`, overlaid with the fields present in a JSON file.
    pub fn from_json_file(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let overrides = read_json_object(path)?;
        if let Some(v) = overrides.get("experiment") {
            if v.as_str() != Some(kind.name()) {
                return Err(ExperimentError::Config(format!(
                    "{} declares experiment {v}, but {kind} was requested",
                    path.display()
                )));
            }
        }
        let defaults = serde_json::to_value(Self::defaults(kind)).expect("config serializes");
        serde_json::from_value(merge(defaults, overrides)).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(ExperimentError::Config(msg));
        if self.sims == 0 {
            return fail("sims must be >= 1".into());
        }
        if self.n < 3 {
            return fail(format!("n must be >= 3, got {}", self.n));
        }
        if let Some(e) = self
            .epsilons
            .iter()
            .find(|e| !(**e > 0.0) || !e.is_finite())
        {
            return fail(format!("every epsilon must be positive, got {e}"));
        }
        if let Some(c) = self.cps.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return fail(format!("every cp must be finite and >= 0, got {c}"));
        }
        if let Some(k) = self.bounds.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
            return fail(format!("every bound multiplier must be positive, got {k}"));
        }
        if self.l == 0 || self.m == 0 {
            return fail("l and m must be >= 1".into());
        }
        if self.bins_per_dim == 0 {
            return fail("bins_per_dim must be >= 1".into());
        }
        if !(self.eval_cp >= 0.0) || !self.eval_cp.is_finite() {
            return fail(format!(
                "eval_cp must be finite and >= 0, got {}",
                self.eval_cp
            ));
        }
        for (name, v) in [
            ("perturb_sd", self.perturb_sd),
            ("theta_sd", self.theta_sd),
            ("prior_sd", self.prior_sd),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        match self.experiment {
            ExperimentKind::FailureRate => {
                if self.depths.is_empty() || self.cps.is_empty() {
                    return fail("failure-rate needs at least one depth and one cp".into());
                }
            }
            ExperimentKind::RegressEval | ExperimentKind::PmseEval => {
                if self.epsilons.is_empty() || self.methods.is_empty() {
                    return fail(format!("{} needs epsilons and methods", self.experiment));
                }
                let bounded = self
                    .methods
                    .iter()
                    .any(|m| matches!(m, Method::NoisyBppd | Method::SmoothHist));
                if bounded && self.bounds.is_empty() {
                    return fail("bounded baselines need at least one bound multiplier".into());
                }
                if self.methods.contains(&Method::PmseMech) {
                    if self.depths.is_empty() || self.cps.is_empty() {
                        return fail("the mechanism needs a depth and a cp".into());
                    }
                    self.chain.validate(5)?;
                }
            }
        }
        Ok(())
    }

    /// Number of cells the experiment reports.
    pub fn cell_count(&self) -> usize {
        match self.experiment {
            ExperimentKind::FailureRate => self.depths.len() * self.cps.len(),
            _ => {
                let variants: usize = self
                    .methods
                    .iter()
                    .map(|m| match m {
                        Method::PmseMech => self.depths.len() * self.cps.len(),
                        Method::NoisyBppd | Method::SmoothHist => self.bounds.len(),
                        Method::NondpBppd => 1,
                    })
                    .sum();
                variants * self.epsilons.len()
            }
        }
    }
}

/// Chain settings for a single release: a tempered multi-start burn-in with
/// step adaptation, then a fixed-seed utility estimate.
pub fn default_chain() -> ChainConfig {
    ChainConfig {
        iterations: 2000,
        burn_in: 500,
        max_proposal_sd: Some(3.0),
        init_candidates: 64,
        anneal: Some(Anneal {
            start_scale: 250.0,
            iterations: 300,
        }),
        replicate_seeds: ReplicateSeeds::Fixed,
        ..ChainConfig::default()
    }
}

/// Shorter chain used by the simulation studies, which run thousands of
/// chains.
pub fn study_chain() -> ChainConfig {
    ChainConfig {
        iterations: 60,
        burn_in: 50,
        anneal: Some(Anneal {
            start_scale: 100.0,
            iterations: 30,
        }),
        ..default_chain()
    }
}

pub(crate) fn read_json_object(path: &Path) -> Result<serde_json::Map<String, serde_json::Value>> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    match value {
        serde_json::Value::Object(map) => Ok(map),
        _ => Err(ExperimentError::Config(format!(
            "{}: top level must be a JSON object",
            path.display()
        ))),
    }
}

/// Recursive object merge; values in `overrides` replace those in `base`.
pub(crate) fn merge(
    base: serde_json::Value,
    overrides: serde_json::Map<String, serde_json::Value>,
) -> serde_json::Value {
    let mut base = match base {
        serde_json::Value::Object(map) => map,
        _ => return serde_json::Value::Object(overrides),
    };
    for (key, value) in overrides {
        let merged = match (base.remove(&key), value) {
            (Some(old @ serde_json::Value::Object(_)), serde_json::Value::Object(new)) => {
                merge(old, new)
            }
            (_, new) => new,
        };
        base.insert(key, merged);
    }
    serde_json::Value::Object(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_text_forms() {
        assert_eq!("unlimited".parse::<Depth>().unwrap(), Depth::Unlimited);
        assert_eq!("5".parse::<Depth>().unwrap(), Depth::Limited(5));
        assert!("0".parse::<Depth>().is_err());
        let json = serde_json::to_string(&vec![Depth::Limited(2), Depth::Unlimited]).unwrap();
        assert_eq!(json, r#"[2,"unlimited"]"#);
        let back: Vec<Depth> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Depth::Limited(2), Depth::Unlimited]);
    }

    #[test]
    fn defaults_validate() {
        for kind in [
            ExperimentKind::FailureRate,
            ExperimentKind::RegressEval,
            ExperimentKind::PmseEval,
        ] {
            ExperimentConfig::defaults(kind).validate().unwrap();
        }
    }

    #[test]
    fn failure_rate_has_eight_cells() {
        assert_eq!(
            ExperimentConfig::defaults(ExperimentKind::FailureRate).cell_count(),
            8
        );
    }

    #[test]
    fn zero_sims_rejected() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::PmseEval);
        cfg.sims = 0;
        assert!(cfg.validate().is_err());
        cfg.sims = 1;
        cfg.epsilons.push(0.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn nested_merge_keeps_unset_fields() {
        let base = serde_json::json!({"a": 1, "chain": {"iterations": 10, "burn_in": 5}});
        let over = serde_json::json!({"chain": {"burn_in": 2}});
        let merged = merge(base, over.as_object().unwrap().clone());
        assert_eq!(
            merged,
            serde_json::json!({"a": 1, "chain": {"iterations": 10, "burn_in": 2}})
        );
    }
}
