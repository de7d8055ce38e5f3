//! The pMSE mechanism: random-walk Metropolis sampling from the
//! exponential-mechanism density
//!
//! ```text
//! f(θ) ∝ exp(−ε·u(X, θ) / (2Δu)) · prior(θ)
//! ```
//!
//! followed by synthesis from the sampled parameters only.
//!
//! Each proposal's utility is estimated from fresh synthetic replicates while
//! the current state keeps the estimate it was accepted with. Each of the `l`
//! released parameter vectors comes from its own chain.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::accounting::{even_split, PrivacyAccountant};
use crate::cart::TreeFitter;
use crate::dataset::DataMatrix;
use crate::error::{PmseError, Result};
use crate::models::{FlatPrior, GenerativeModel, ThetaVector};
use crate::scalar::Scalar;
use crate::seeding::stream_rng;
use crate::utility::{sensitivity_bound, PmseEvaluator};

/// Acceptance rates outside this band produce a warning diagnostic.
pub const ACCEPTANCE_WARN_BAND: (f64, f64) = (0.05, 0.95);

/// Per-coordinate acceptance rate that burn-in step adaptation steers toward.
const TARGET_ACCEPTANCE: f64 = 0.3;

/// The k-th step adjustment of a coordinate has gain `1/sqrt(1 + k/ADAPT_DECAY)`.
const ADAPT_DECAY: f64 = 20.0;

/// Which synthetic replicates estimate the utility at each proposal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplicateSeeds {
    /// New replicates for every proposal; the current state keeps the
    /// estimate it was accepted with.
    #[default]
    Fresh,
    /// One set of replicate seeds for the whole chain, so the estimated
    /// utility is a fixed function of `θ`.
    Fixed,
}

/// Tempered start of the burn-in: the utility coefficient `ε/(2Δu)` is
/// capped at `start_scale` and rises geometrically to its full value over
/// the first `iterations` sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anneal {
    pub start_scale: f64,
    pub iterations: usize,
}

impl Anneal {
    /// Coefficient cap at sweep `iter` for a target whose full coefficient is `full`.
    fn cap(&self, iter: usize, full: f64) -> f64 {
        if iter >= self.iterations || self.start_scale >= full {
            return f64::INFINITY;
        }
        self.start_scale * (full / self.start_scale).powf(iter as f64 / self.iterations as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Sweeps; every sweep proposes a move in each coordinate in turn.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Initial per-coordinate random-walk sd; one entry per parameter, or a
    /// single entry applied to all.
    pub proposal_sd: Vec<f64>,
    /// Adapt step sizes during burn-in.
    pub tune: bool,
    /// Upper limit on adapted step sizes.
    pub max_proposal_sd: Option<f64>,
    /// Fixed starting point; drawn from N(0, init_sd²) when absent.
    pub init: Option<Vec<f64>>,
    pub init_sd: f64,
    /// Starting points drawn; the chain starts at the one with the highest
    /// target density.
    pub init_candidates: usize,
    pub anneal: Option<Anneal>,
    pub replicate_seeds: ReplicateSeeds,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 500,
            thin: 1,
            proposal_sd: vec![1.0],
            tune: true,
            max_proposal_sd: None,
            init: None,
            init_sd: 10.0,
            init_candidates: 1,
            anneal: None,
            replicate_seeds: ReplicateSeeds::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(PmseError::Domain(format!(
                "need burn_in < iterations, got {} and {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(PmseError::Domain("thin must be >= 1".into()));
        }
        if !(self.proposal_sd.len() == 1 || self.proposal_sd.len() == dim) {
            return Err(PmseError::Domain(format!(
                "proposal_sd needs 1 or {dim} entries, got {}",
                self.proposal_sd.len()
            )));
        }
        if self
            .proposal_sd
            .iter()
            .any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(PmseError::Domain("proposal sd must be positive".into()));
        }
        if let Some(max) = self.max_proposal_sd {
            if !(max > 0.0) || !max.is_finite() {
                return Err(PmseError::Domain("max_proposal_sd must be positive".into()));
            }
        }
        if let Some(init) = &self.init {
            if init.len() != dim {
                return Err(PmseError::Domain(format!(
                    "init needs {dim} entries, got {}",
                    init.len()
                )));
            }
        }
        if !(self.init_sd > 0.0) || !self.init_sd.is_finite() {
            return Err(PmseError::Domain("init_sd must be positive".into()));
        }
        if self.init_candidates == 0 {
            return Err(PmseError::Domain("init_candidates must be >= 1".into()));
        }
        if let Some(a) = &self.anneal {
            if !(a.start_scale > 0.0) || !a.start_scale.is_finite() {
                return Err(PmseError::Domain(
                    "anneal start_scale must be positive".into(),
                ));
            }
            if a.iterations > self.burn_in {
                return Err(PmseError::Domain(format!(
                    "annealing ({} sweeps) must end within the burn-in ({})",
                    a.iterations, self.burn_in
                )));
            }
        }
        Ok(())
    }

    fn step_sizes(&self, dim: usize) -> Vec<f64> {
        if self.proposal_sd.len() == dim {
            self.proposal_sd.clone()
        } else {
            vec![self.proposal_sd[0]; dim]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanismConfig {
    pub epsilon_total: f64,
    pub num_datasets: usize,
    pub replicates_m: usize,
    /// Sensitivity used to scale the exponent; `1/n` when absent.
    pub delta_u: Option<f64>,
    pub prior: FlatPrior,
    pub chain: ChainConfig,
    pub fitter: TreeFitter,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        Self {
            epsilon_total: 1.0,
            num_datasets: 10,
            replicates_m: 20,
            delta_u: None,
            prior: FlatPrior::default(),
            chain: ChainConfig::default(),
            fitter: TreeFitter::default(),
        }
    }
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_total > 0.0) || !self.epsilon_total.is_finite() {
            return Err(PmseError::Domain(format!(
                "epsilon_total must be positive, got {}",
                self.epsilon_total
            )));
        }
        if self.num_datasets == 0 {
            return Err(PmseError::Domain("num_datasets must be >= 1".into()));
        }
        if self.replicates_m == 0 {
            return Err(PmseError::Domain("replicates_m must be >= 1".into()));
        }
        if let Some(d) = self.delta_u {
            if !(d > 0.0) || !d.is_finite() {
                return Err(PmseError::Domain(format!(
                    "delta_u must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }

    pub fn per_draw_epsilon(&self) -> Result<f64> {
        even_split(self.epsilon_total, self.num_datasets)
    }

    pub fn resolved_delta_u(&self, n: usize) -> Result<f64> {
        match self.delta_u {
            Some(d) => Ok(d),
            None => sensitivity_bound(n),
        }
    }
}

/// One evaluation of an unnormalized log density of the form
/// `log_prior − scale·utility`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetValue {
    /// `-inf` outside the support.
    pub log_prior: f64,
    pub utility: f64,
    /// Coefficient on the utility; annealing caps it.
    pub scale: f64,
}

impl TargetValue {
    pub fn outside_support() -> Self {
        Self {
            log_prior: f64::NEG_INFINITY,
            utility: f64::NAN,
            scale: 0.0,
        }
    }

    /// A density with no utility term.
    pub fn plain(log_density: f64) -> Self {
        Self {
            log_prior: log_density,
            utility: 0.0,
            scale: 0.0,
        }
    }

    pub fn in_support(&self) -> bool {
        self.log_prior > f64::NEG_INFINITY
    }

    pub fn log_density(&self) -> f64 {
        self.tempered(f64::INFINITY)
    }

    /// Log density with the utility coefficient capped at `cap`.
    pub fn tempered(&self, cap: f64) -> f64 {
        if !self.in_support() {
            return f64::NEG_INFINITY;
        }
        if self.scale == 0.0 {
            return self.log_prior;
        }
        self.log_prior - self.scale.min(cap) * self.utility
    }
}

/// An unnormalized log density the sampler can walk on. `seed` feeds any
/// internal Monte Carlo estimate.
pub trait LogTarget<T: Scalar> {
    fn dim(&self) -> usize;

    fn evaluate(&self, theta: &ThetaVector<T>, seed: u64) -> Result<TargetValue>;
}

/// `−ε·u(X, θ)/(2Δu) + log prior(θ)` with `u` estimated from `m` replicates.
pub struct PmseTarget<'a, T: Scalar, M: GenerativeModel<T>> {
    evaluator: PmseEvaluator<'a, T>,
    model: &'a M,
    pub eps_draw: f64,
    pub delta_u: f64,
    pub replicates_m: usize,
    pub prior: FlatPrior,
}

impl<'a, T: Scalar, M: GenerativeModel<T>> PmseTarget<'a, T, M> {
    pub fn new(
        original: &'a DataMatrix<T>,
        model: &'a M,
        eps_draw: f64,
        cfg: &MechanismConfig,
    ) -> Result<Self> {
        if !(eps_draw > 0.0) {
            return Err(PmseError::Domain(format!(
                "per-draw epsilon must be positive, got {eps_draw}"
            )));
        }
        Ok(Self {
            evaluator: PmseEvaluator::new(original, &cfg.fitter),
            model,
            eps_draw,
            delta_u: cfg.resolved_delta_u(original.nrows())?,
            replicates_m: cfg.replicates_m,
            prior: cfg.prior,
        })
    }
}

impl<T: Scalar, M: GenerativeModel<T>> LogTarget<T> for PmseTarget<'_, T, M> {
    fn dim(&self) -> usize {
        self.model.arity()
    }

    fn evaluate(&self, theta: &ThetaVector<T>, seed: u64) -> Result<TargetValue> {
        match self
            .evaluator
            .utility_from_seed(theta, self.model, self.replicates_m, seed)
        {
            Ok(u) => Ok(TargetValue {
                log_prior: self.prior.log_density(theta),
                utility: u.mean_pmse.value().as_f64(),
                scale: self.eps_draw / (2.0 * self.delta_u),
            }),
            Err(PmseError::ModelDomain(_)) => Ok(TargetValue::outside_support()),
            Err(e) => Err(e),
        }
    }
}

/// Exponential-mechanism log target at `theta`; invalid parameters give `-inf`.
pub fn log_target<T: Scalar, M: GenerativeModel<T>>(
    x: &DataMatrix<T>,
    theta: &ThetaVector<T>,
    model: &M,
    eps_draw: f64,
    cfg: &MechanismConfig,
    seed: u64,
) -> Result<f64> {
    Ok(PmseTarget::new(x, model, eps_draw, cfg)?
        .evaluate(theta, seed)?
        .log_density())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    /// Share of accepted coordinate proposals after burn-in.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    pub final_proposal_sd: Vec<f64>,
    /// Utility of the current state after every post-burn-in sweep.
    pub utility_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun<T> {
    /// Post-burn-in states, thinned.
    pub samples: Vec<ThetaVector<T>>,
    /// State after the final sweep.
    pub last: ThetaVector<T>,
    pub diagnostics: ChainDiagnostics,
}

/// Componentwise random-walk Metropolis on `target`.
///
/// The chain starts at whichever of `starts` has the highest (tempered)
/// density. During burn-in each coordinate's step size is adapted toward
/// the target acceptance rate and, with `cfg.anneal`, the utility
/// coefficient is capped; both stop at the end of burn-in.
pub fn run_chain<T: Scalar, L: LogTarget<T> + ?Sized>(
    target: &L,
    starts: &[ThetaVector<T>],
    cfg: &ChainConfig,
    seed: u64,
) -> Result<ChainRun<T>> {
    let dim = target.dim();
    cfg.validate(dim)?;
    if starts.is_empty() {
        return Err(PmseError::Domain("no starting points".into()));
    }
    if let Some(bad) = starts.iter().find(|s| s.len() != dim) {
        return Err(PmseError::Domain(format!(
            "start has {} entries, target has {dim}",
            bad.len()
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let fixed_seed = stream_rng(seed, 2).next_u64();
    let next_seed = |rng: &mut rand_chacha::ChaCha8Rng| match cfg.replicate_seeds {
        ReplicateSeeds::Fresh => rng.next_u64(),
        ReplicateSeeds::Fixed => fixed_seed,
    };
    let cap_at = |iter: usize, value: &TargetValue| match &cfg.anneal {
        Some(a) => a.cap(iter, value.scale),
        None => f64::INFINITY,
    };

    let mut best: Option<(ThetaVector<T>, TargetValue, f64)> = None;
    for start in starts {
        let value = target.evaluate(start, next_seed(&mut rng))?;
        let density = value.tempered(cap_at(0, &value));
        if value.in_support() && best.as_ref().is_none_or(|b| density > b.2) {
            best = Some((start.clone(), value, density));
        }
    }
    let Some((mut current, mut current_value, _)) = best else {
        return Err(PmseError::Domain(
            "chain initialised outside the target's support".into(),
        ));
    };

    let mut steps = cfg.step_sizes(dim);
    let mut adjustments = 0usize;
    let mut accepted_burn = 0usize;
    let mut accepted_main = 0usize;
    let mut samples = Vec::with_capacity((cfg.iterations - cfg.burn_in) / cfg.thin + 1);
    let mut utility_trace = Vec::with_capacity(cfg.iterations - cfg.burn_in);
    let mut proposal = current.clone();

    for iter in 0..cfg.iterations {
        let burning = iter < cfg.burn_in;
        if burning {
            adjustments += 1;
        }
        let gain = 1.0 / (1.0 + adjustments as f64 / ADAPT_DECAY).sqrt();
        for j in 0..dim {
            proposal.0[j] = current.0[j] + T::lit(steps[j]) * T::standard_normal(&mut rng);
            let eval_seed = next_seed(&mut rng);
            let log_u: f64 = rng.random::<f64>().ln();
            let value = target.evaluate(&proposal, eval_seed)?;
            let cap = cap_at(iter, &current_value);
            let accept =
                value.in_support() && log_u < value.tempered(cap) - current_value.tempered(cap);
            if accept {
                current.0[j] = proposal.0[j];
                current_value = value;
            } else {
                proposal.0[j] = current.0[j];
            }
            if burning {
                accepted_burn += accept as usize;
                if cfg.tune {
                    steps[j] *= (gain * (accept as u8 as f64 - TARGET_ACCEPTANCE)).exp();
                    if let Some(max) = cfg.max_proposal_sd {
                        steps[j] = steps[j].min(max);
                    }
                }
            } else {
                accepted_main += accept as usize;
            }
        }
        if !burning {
            utility_trace.push(current_value.utility);
            if (iter - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
                samples.push(current.clone());
            }
        }
    }

    let proposals = |sweeps: usize| (sweeps * dim) as f64;
    let acceptance_rate = accepted_main as f64 / proposals(cfg.iterations - cfg.burn_in);
    let mut warnings = Vec::new();
    if acceptance_rate < ACCEPTANCE_WARN_BAND.0 || acceptance_rate > ACCEPTANCE_WARN_BAND.1 {
        warnings.push(format!(
            "acceptance rate {acceptance_rate:.3} outside [{}, {}]",
            ACCEPTANCE_WARN_BAND.0, ACCEPTANCE_WARN_BAND.1
        ));
    }
    Ok(ChainRun {
        samples,
        last: current,
        diagnostics: ChainDiagnostics {
            acceptance_rate,
            burn_in_acceptance_rate: if cfg.burn_in > 0 {
                accepted_burn as f64 / proposals(cfg.burn_in)
            } else {
                f64::NAN
            },
            final_proposal_sd: steps,
            utility_trace,
            warnings,
        },
    })
}

/// Starting points for a model's chain: the configured one, or
/// `init_candidates` draws from N(0, init_sd²) with scale parameters folded
/// to positive values.
pub fn initial_thetas<T: Scalar, M: GenerativeModel<T>, R: Rng + ?Sized>(
    model: &M,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<Vec<ThetaVector<T>>> {
    if let Some(init) = &cfg.init {
        let theta = ThetaVector::from_f64(init);
        model.validate(&theta)?;
        return Ok(vec![theta]);
    }
    Ok((0..cfg.init_candidates)
        .map(|_| {
            let mut theta: Vec<T> = (0..model.arity())
                .map(|_| T::lit(cfg.init_sd) * T::standard_normal(rng))
                .collect();
            for &i in model.scale_indices() {
                theta[i] = theta[i].abs().max(T::min_positive_value());
            }
            ThetaVector(theta)
        })
        .collect())
}

/// One private draw `θ̃` at budget `eps_draw`: the final state of a chain.
pub fn metropolis_sample<T: Scalar, M: GenerativeModel<T>>(
    x: &DataMatrix<T>,
    model: &M,
    eps_draw: f64,
    cfg: &MechanismConfig,
    seed: u64,
) -> Result<(ThetaVector<T>, ChainDiagnostics)> {
    cfg.validate()?;
    let target = PmseTarget::new(x, model, eps_draw, cfg)?;
    let starts = initial_thetas(model, &cfg.chain, &mut stream_rng(seed, 1))?;
    let run = run_chain(&target, &starts, &cfg.chain, seed)?;
    Ok((run.last, run.diagnostics))
}

/// Generate one synthetic dataset from released parameters. Only `θ̃` and the
/// seed are visible here.
pub fn synthesize_from_theta<T: Scalar, M: GenerativeModel<T>>(
    model: &M,
    theta: &ThetaVector<T>,
    seed: u64,
) -> Result<DataMatrix<T>> {
    model.sample(theta, &mut stream_rng(seed, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismOutput<T> {
    pub thetas: Vec<ThetaVector<T>>,
    pub datasets: Vec<DataMatrix<T>>,
    pub epsilon_spent: f64,
    pub per_draw_epsilon: f64,
    pub delta_u: f64,
    /// Seeds that regenerate `datasets[i]` from `thetas[i]`.
    pub synthesis_seeds: Vec<u64>,
    pub diagnostics: Vec<ChainDiagnostics>,
}

/// Chain and synthesis seeds of draw `i` under a run's master seed. The
/// master seed is the first `u64` taken from the generator passed to
/// [`run_mechanism`].
pub fn draw_seeds(master: u64, i: u64) -> (u64, u64) {
    (
        stream_rng(master, 2 * i).next_u64(),
        stream_rng(master, 2 * i + 1).next_u64(),
    )
}

/// Release `l` synthetic datasets, each from an independent chain at budget
/// `epsilon_total / l`.
pub fn run_mechanism<T: Scalar, M: GenerativeModel<T>, R: RngCore + ?Sized>(
    x: &DataMatrix<T>,
    model: &M,
    cfg: &MechanismConfig,
    rng: &mut R,
) -> Result<MechanismOutput<T>> {
    cfg.validate()?;
    let eps_draw = cfg.per_draw_epsilon()?;
    let delta_u = cfg.resolved_delta_u(x.nrows())?;
    let master = rng.next_u64();
    let mut accountant = PrivacyAccountant::new(cfg.epsilon_total)?;
    let mut out = MechanismOutput {
        thetas: Vec::with_capacity(cfg.num_datasets),
        datasets: Vec::with_capacity(cfg.num_datasets),
        epsilon_spent: 0.0,
        per_draw_epsilon: eps_draw,
        delta_u,
        synthesis_seeds: Vec::with_capacity(cfg.num_datasets),
        diagnostics: Vec::with_capacity(cfg.num_datasets),
    };
    for i in 0..cfg.num_datasets as u64 {
        let (chain_seed, synth_seed) = draw_seeds(master, i);
        let (theta, diag) = metropolis_sample(x, model, eps_draw, cfg, chain_seed)?;
        accountant.charge(eps_draw)?;
        out.datasets
            .push(synthesize_from_theta(model, &theta, synth_seed)?);
        out.thetas.push(theta);
        out.synthesis_seeds.push(synth_seed);
        out.diagnostics.push(diag);
    }
    out.epsilon_spent = accountant.spent();
    Ok(out)
}
