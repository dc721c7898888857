//! EM initialization strategies.
//!
//! Each strategy produces a starting [`MixtureModel`]. Trials draw from
//! independent sub-seeds of the master seed (`sub_seed(seed, t)`), so trial
//! `t` of every strategy starts from the same random model.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{run_em, EmConfig, StepKind};
use crate::error::{MmError, Result};
use crate::rng::{rng_from_seed, sample_dirichlet, sub_seed};
use crate::types::{CountDataset, MixtureModel, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    Random,
    RndEm,
    SmEm,
    Cem,
    Sem,
}

impl InitStrategy {
    pub const ALL: [InitStrategy; 5] = [
        InitStrategy::Random,
        InitStrategy::RndEm,
        InitStrategy::SmEm,
        InitStrategy::Cem,
        InitStrategy::Sem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitStrategy::Random => "random",
            InitStrategy::RndEm => "rnd-em",
            InitStrategy::SmEm => "sm-em",
            InitStrategy::Cem => "cem",
            InitStrategy::Sem => "sem",
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitStrategy {
    type Err = MmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "random" => Ok(InitStrategy::Random),
            "rnd-em" | "rndem" => Ok(InitStrategy::RndEm),
            "sm-em" | "smem" => Ok(InitStrategy::SmEm),
            "cem" => Ok(InitStrategy::Cem),
            "sem" => Ok(InitStrategy::Sem),
            other => Err(MmError::InvalidConfig(format!(
                "unknown init strategy `{other}` (expected random, rnd-em, sm-em, cem, sem)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub strategy: InitStrategy,
    pub trials: usize,
    /// EM iteration cap per trial (the total budget for SEM).
    pub short_run_iterations: usize,
    pub seed: u64,
}

impl InitConfig {
    /// Standard settings: 1 random trial, 100 rndEM trials, 5 × 50 iterations
    /// for smEM and CEM, a single 500-iteration SEM run.
    pub fn new(strategy: InitStrategy, seed: u64) -> Self {
        let (trials, short_run_iterations) = match strategy {
            InitStrategy::Random => (1, 0),
            InitStrategy::RndEm => (100, 0),
            InitStrategy::SmEm | InitStrategy::Cem => (5, 50),
            InitStrategy::Sem => (1, 500),
        };
        Self {
            strategy,
            trials,
            short_run_iterations,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(MmError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.strategy == InitStrategy::Sem && self.short_run_iterations == 0 {
            return Err(MmError::InvalidConfig(
                "SEM needs at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

impl Default for InitConfig {
    fn default() -> Self {
        Self::new(InitStrategy::SmEm, 0)
    }
}

/// Starting model plus the per-trial log-likelihoods it was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome {
    pub model: MixtureModel,
    pub log_likelihood: f64,
    pub trial_log_likelihoods: Vec<f64>,
    /// Per-iteration log-likelihoods of the winning trial's short run.
    pub trace: Vec<f64>,
}

fn check_k(data: &CountDataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(MmError::InvalidConfig("K must be >= 1".into()));
    }
    if k > data.n() {
        return Err(MmError::TooManyComponents { k, n: data.n() });
    }
    Ok(())
}

/// Uniform weights, each component drawn uniformly from the simplex.
pub fn init_random(data: &CountDataset, k: usize, seed: u64) -> Result<MixtureModel> {
    random_model(data, k, seed, crate::types::DEFAULT_PROB_FLOOR)
}

fn random_model(data: &CountDataset, k: usize, seed: u64, floor: f64) -> Result<MixtureModel> {
    check_k(data, k)?;
    let mut rng = rng_from_seed(sub_seed(seed, 0));
    let components = (0..k)
        .map(|_| ProbVector::from_weights(sample_dirichlet(&mut rng, 1.0, data.dim()), floor))
        .collect::<Result<Vec<_>>>()?;
    MixtureModel::normalized(vec![1.0; k], components)
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    if trial == 0 {
        seed
    } else {
        sub_seed(seed, trial as u64)
    }
}

/// Reduces trials by maximum log-likelihood; ties go to the earliest trial.
fn best_of(trials: Vec<(f64, MixtureModel, Vec<f64>)>) -> InitOutcome {
    let trial_log_likelihoods: Vec<f64> = trials.iter().map(|t| t.0).collect();
    let mut best = 0;
    for (i, (ll, _, _)) in trials.iter().enumerate() {
        if *ll > trials[best].0 {
            best = i;
        }
    }
    let (log_likelihood, model, trace) = trials.into_iter().nth(best).expect("trials >= 1");
    InitOutcome {
        model,
        log_likelihood,
        trial_log_likelihoods,
        trace,
    }
}

fn run_trials(
    data: &CountDataset,
    k: usize,
    trials: usize,
    seed: u64,
    em: &EmConfig,
    short_run: Option<(usize, StepKind)>,
) -> Result<InitOutcome> {
    if trials == 0 {
        return Err(MmError::InvalidConfig("trials must be >= 1".into()));
    }
    check_k(data, k)?;
    em.validate(data.dim())?;
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let start = random_model(data, k, s, em.prob_floor)?;
            match short_run {
                Some((iters, kind)) if iters > 0 => {
                    let cfg = EmConfig {
                        max_iterations: iters,
                        seed: sub_seed(s, 1),
                        ..em.clone()
                    };
                    let fit = run_em(data, &start, &cfg, kind)?;
                    Ok((fit.log_likelihood, fit.model, fit.trace))
                }
                _ => {
                    let (ll, _) =
                        crate::em::evaluate_model(data, start.clone(), em.include_coefficient)?;
                    Ok((ll, start, vec![ll]))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(best_of(results))
}

/// Best of `trials` random models by log-likelihood, without EM iterations.
pub fn init_rnd_em(
    data: &CountDataset,
    k: usize,
    trials: usize,
    seed: u64,
    em: &EmConfig,
) -> Result<InitOutcome> {
    run_trials(data, k, trials, seed, em, None)
}

/// Best of `trials` short EM runs, each capped at `short_run_iterations`.
pub fn init_sm_em(
    data: &CountDataset,
    k: usize,
    trials: usize,
    short_run_iterations: usize,
    seed: u64,
    em: &EmConfig,
) -> Result<InitOutcome> {
    run_trials(
        data,
        k,
        trials,
        seed,
        em,
        Some((short_run_iterations, StepKind::Soft)),
    )
}

/// Like smEM, with responsibilities hardened to their argmax before each M-step.
pub fn init_cem(
    data: &CountDataset,
    k: usize,
    trials: usize,
    short_run_iterations: usize,
    seed: u64,
    em: &EmConfig,
) -> Result<InitOutcome> {
    run_trials(
        data,
        k,
        trials,
        seed,
        em,
        Some((short_run_iterations, StepKind::Classification)),
    )
}

/// One stochastic EM run; returns the iterate with the highest log-likelihood.
pub fn init_sem(
    data: &CountDataset,
    k: usize,
    max_iterations: usize,
    seed: u64,
    em: &EmConfig,
) -> Result<InitOutcome> {
    if max_iterations == 0 {
        return Err(MmError::InvalidConfig(
            "SEM needs at least one iteration".into(),
        ));
    }
    run_trials(
        data,
        k,
        1,
        seed,
        em,
        Some((max_iterations, StepKind::Stochastic)),
    )
}

/// Dispatches on [`InitConfig::strategy`].
pub fn initialize(
    data: &CountDataset,
    k: usize,
    config: &InitConfig,
    em: &EmConfig,
) -> Result<InitOutcome> {
    config.validate()?;
    match config.strategy {
        InitStrategy::Random => {
            check_k(data, k)?;
            let model = random_model(data, k, config.seed, em.prob_floor)?;
            let (ll, _) = crate::em::evaluate_model(data, model.clone(), em.include_coefficient)?;
            Ok(InitOutcome {
                model,
                log_likelihood: ll,
                trial_log_likelihoods: vec![ll],
                trace: vec![ll],
            })
        }
        InitStrategy::RndEm => init_rnd_em(data, k, config.trials, config.seed, em),
        InitStrategy::SmEm => init_sm_em(
            data,
            k,
            config.trials,
            config.short_run_iterations,
            config.seed,
            em,
        ),
        InitStrategy::Cem => init_cem(
            data,
            k,
            config.trials,
            config.short_run_iterations,
            config.seed,
            em,
        ),
        InitStrategy::Sem => init_sem(data, k, config.short_run_iterations, config.seed, em),
    }
}
