//! Synthetic labeled count data drawn from randomly constructed mixtures.
//!
//! Component parameters come from a symmetric Dirichlet, each component gets
//! an order `V_k` drawn uniformly from `[⌈D/2⌉, ⌊3D/2⌋]`, and models are redrawn
//! until their separation class (by minimum pairwise sKLD) matches the target.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::modelgen::skld;
use crate::rng::{rng_from_seed, sample_categorical, sample_dirichlet, sub_seed};
use crate::types::{CountDataset, CountVector, MixtureModel, ProbVector, DEFAULT_PROB_FLOOR};

pub const DEFAULT_SEPARATION_THRESHOLD: f64 = 1.0;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Separation {
    /// Well separated.
    Ws,
    /// Not well separated.
    Nws,
}

impl Separation {
    pub fn name(self) -> &'static str {
        match self {
            Separation::Ws => "ws",
            Separation::Nws => "nws",
        }
    }

    pub fn default_alpha(self) -> f64 {
        match self {
            Separation::Ws => 0.1,
            Separation::Nws => 1.0,
        }
    }
}

impl fmt::Display for Separation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Separation {
    type Err = MmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ws" => Ok(Separation::Ws),
            "nws" => Ok(Separation::Nws),
            other => Err(MmError::InvalidConfig(format!(
                "unknown separation `{other}` (expected ws or nws)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    /// Defaults to 0.1 for `ws` and 1.0 for `nws`.
    #[serde(default)]
    pub dirichlet_alpha: Option<f64>,
    /// Inclusive order range; defaults to `(⌈D/2⌉, ⌊3D/2⌋)`.
    #[serde(default)]
    pub order_range: Option<(u64, u64)>,
    pub separation: Separation,
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Mixing weights; uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(k: usize, d: usize, n: usize, separation: Separation, seed: u64) -> Self {
        Self {
            k,
            d,
            n,
            dirichlet_alpha: None,
            order_range: None,
            separation,
            threshold: None,
            weights: None,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.dirichlet_alpha
            .unwrap_or_else(|| self.separation.default_alpha())
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(DEFAULT_SEPARATION_THRESHOLD)
    }

    pub fn orders(&self) -> (u64, u64) {
        self.order_range.unwrap_or_else(|| {
            let d = self.d as u64;
            (d.div_ceil(2).max(1), (3 * d / 2).max(1))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(MmError::InvalidConfig("K must be >= 1".into()));
        }
        if self.d < 2 {
            return Err(MmError::InvalidConfig("D must be >= 2".into()));
        }
        if self.n < self.k {
            return Err(MmError::InvalidConfig(format!(
                "N={} must be >= K={}",
                self.n, self.k
            )));
        }
        if !(self.alpha() > 0.0 && self.alpha().is_finite()) {
            return Err(MmError::InvalidConfig("dirichlet_alpha must be > 0".into()));
        }
        let (lo, hi) = self.orders();
        if lo > hi {
            return Err(MmError::InvalidConfig(format!(
                "empty order range {lo}..={hi}"
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.k || w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(MmError::InvalidConfig(
                    "weights must be K positive finite values".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingModel {
    pub model: MixtureModel,
    pub orders: Vec<u64>,
    /// Minimum pairwise sKLD between components (`+∞` for `K = 1`).
    pub min_skld: f64,
    pub attempts: usize,
}

/// Minimum pairwise sKLD between the components of `model`.
pub fn min_pairwise_skld(model: &MixtureModel) -> f64 {
    let comps = model.components();
    let mut min = f64::INFINITY;
    for i in 0..comps.len() {
        for j in (i + 1)..comps.len() {
            min = min.min(skld(&comps[i], &comps[j]).expect("shared D"));
        }
    }
    min
}

/// `ws` iff every pair of components is at least `threshold` apart in sKLD.
pub fn classify_separation(model: &MixtureModel, threshold: f64) -> Separation {
    if model.k() < 2 || min_pairwise_skld(model) >= threshold {
        Separation::Ws
    } else {
        Separation::Nws
    }
}

pub fn sample_generating_model(spec: &SynthSpec) -> Result<GeneratingModel> {
    sample_generating_model_with_budget(spec, DEFAULT_MAX_ATTEMPTS)
}

pub fn sample_generating_model_with_budget(
    spec: &SynthSpec,
    max_attempts: usize,
) -> Result<GeneratingModel> {
    spec.validate()?;
    let mut rng = rng_from_seed(sub_seed(spec.seed, 0));
    let alpha = spec.alpha();
    let threshold = spec.threshold();
    let (lo, hi) = spec.orders();
    let weights = spec
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0; spec.k]);
    let mut seen = (f64::INFINITY, f64::NEG_INFINITY);
    for attempt in 1..=max_attempts.max(1) {
        let components = (0..spec.k)
            .map(|_| {
                ProbVector::from_weights(sample_dirichlet(&mut rng, alpha, spec.d), DEFAULT_PROB_FLOOR)
            })
            .collect::<Result<Vec<_>>>()?;
        let orders: Vec<u64> = (0..spec.k).map(|_| rng.random_range(lo..=hi)).collect();
        let model = MixtureModel::normalized(weights.clone(), components)?;
        let min_skld = min_pairwise_skld(&model);
        if spec.k == 1 || classify_separation(&model, threshold) == spec.separation {
            return Ok(GeneratingModel {
                model,
                orders,
                min_skld,
                attempts: attempt,
            });
        }
        seen = (seen.0.min(min_skld), seen.1.max(min_skld));
    }
    Err(MmError::RejectionExhausted {
        target: spec.separation.to_string(),
        attempts: max_attempts,
        threshold,
        min_seen: seen.0,
        max_seen: seen.1,
    })
}

/// Draws `n` labeled samples; labels are 1-based component indices.
pub fn sample_dataset(
    model: &MixtureModel,
    orders: &[u64],
    n: usize,
    seed: u64,
) -> Result<CountDataset> {
    if orders.len() != model.k() {
        return Err(MmError::InvalidConfig(format!(
            "{} orders for {} components",
            orders.len(),
            model.k()
        )));
    }
    if n == 0 {
        return Err(MmError::EmptyDataset);
    }
    let mut rng = rng_from_seed(seed);
    let samplers = model
        .components()
        .iter()
        .map(|c| WeightedIndex::new(c.as_slice()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| MmError::InvalidModel(e.to_string()))?;
    let dim = model.dim();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut counts = vec![0u32; dim];
    for _ in 0..n {
        let z = sample_categorical(&mut rng, model.weights());
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..orders[z] {
            counts[samplers[z].sample(&mut rng)] += 1;
        }
        rows.push(CountVector::from_dense(&counts)?);
        labels.push(z + 1);
    }
    CountDataset::new(rows)?.with_labels(labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SynthSpec,
    pub generating: GeneratingModel,
    pub dataset: CountDataset,
}

/// Generating model from `sub_seed(seed, 0)`, samples from `sub_seed(seed, 1)`.
pub fn generate(spec: &SynthSpec) -> Result<SyntheticData> {
    let generating = sample_generating_model(spec)?;
    let dataset = sample_dataset(
        &generating.model,
        &generating.orders,
        spec.n,
        sub_seed(spec.seed, 1),
    )?;
    Ok(SyntheticData {
        spec: spec.clone(),
        generating,
        dataset,
    })
}
