//! Multinomial densities and the EM algorithm for multinomial mixtures.
//!
//! Every likelihood here excludes the multinomial coefficient unless it is
//! requested explicitly (`with_coefficient` / [`EmConfig::include_coefficient`]).
//! The coefficient depends only on the data, so it shifts the log-likelihood
//! of every model fitted to the same dataset by one constant.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{MmError, Result};
use crate::rng::{rng_from_seed, sample_categorical, SeededRng};
use crate::types::{
    floor_to_simplex, CountDataset, CountVector, MixtureModel, ProbVector, ResponsibilityMatrix,
    DEFAULT_PROB_FLOOR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Absolute log-likelihood change below which EM stops.
    pub tolerance: f64,
    pub prob_floor: f64,
    pub seed: u64,
    /// Add the multinomial coefficient to every reported log-likelihood.
    pub include_coefficient: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-5,
            prob_floor: DEFAULT_PROB_FLOOR,
            seed: 0,
            include_coefficient: false,
        }
    }
}

impl EmConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(MmError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(MmError::InvalidConfig("tolerance must be > 0".into()));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor * (dim as f64) < 1.0) {
            return Err(MmError::InvalidConfig(format!(
                "prob_floor {} must lie in (0, 1/D) for D={dim}",
                self.prob_floor
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_max_iterations(&self, max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: MixtureModel,
    pub log_likelihood: f64,
    pub responsibilities: ResponsibilityMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Wall-clock seconds.
    pub elapsed: f64,
    /// Log-likelihood of the starting model followed by one value per iteration.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn k(&self) -> usize {
        self.model.k()
    }

    /// 0-based component index with the largest responsibility per sample.
    pub fn assignments(&self) -> Vec<usize> {
        self.responsibilities.hard_assignments()
    }
}

/// `log V! - Σ_d log x_d!`.
pub fn log_multinomial_coefficient(x: &CountVector) -> f64 {
    if x.order() == 0 {
        return 0.0;
    }
    let mut out = ln_gamma(x.order() as f64 + 1.0);
    for &(_, c) in x.nonzeros() {
        out -= ln_gamma(c as f64 + 1.0);
    }
    out
}

/// Sum of the log multinomial coefficients over all rows.
pub fn dataset_log_coefficient(data: &CountDataset) -> f64 {
    data.rows().iter().map(log_multinomial_coefficient).sum()
}

pub fn log_multinomial_pmf(x: &CountVector, mu: &ProbVector, with_coefficient: bool) -> Result<f64> {
    if x.dim() != mu.dim() {
        return Err(MmError::DimensionMismatch {
            expected: mu.dim(),
            got: x.dim(),
        });
    }
    let probs = mu.as_slice();
    let mut out: f64 = x
        .nonzeros()
        .iter()
        .map(|&(d, c)| c as f64 * probs[d as usize].ln())
        .sum();
    if with_coefficient {
        out += log_multinomial_coefficient(x);
    }
    Ok(out)
}

pub fn mixture_log_likelihood(data: &CountDataset, model: &MixtureModel) -> Result<f64> {
    mixture_log_likelihood_with(data, model, false)
}

pub fn mixture_log_likelihood_with(
    data: &CountDataset,
    model: &MixtureModel,
    include_coefficient: bool,
) -> Result<f64> {
    let (_, ll) = e_step_with_likelihood(data, model)?;
    Ok(if include_coefficient {
        ll + dataset_log_coefficient(data)
    } else {
        ll
    })
}

pub fn e_step(data: &CountDataset, model: &MixtureModel) -> Result<ResponsibilityMatrix> {
    Ok(e_step_with_likelihood(data, model)?.0)
}

/// Responsibilities together with the (coefficient-free) log-likelihood,
/// which falls out of the per-row log-sum-exp.
pub fn e_step_with_likelihood(
    data: &CountDataset,
    model: &MixtureModel,
) -> Result<(ResponsibilityMatrix, f64)> {
    data.check_dim(model.dim())?;
    let k = model.k();
    let log_weights: Vec<f64> = model.weights().iter().map(|w| w.ln()).collect();
    let log_mu: Vec<Vec<f64>> = model
        .components()
        .iter()
        .map(|c| c.as_slice().iter().map(|p| p.ln()).collect())
        .collect();

    let mut values = vec![0.0; data.n() * k];
    let mut total = 0.0;
    let mut scores = vec![0.0; k];
    for (i, row) in data.rows().iter().enumerate() {
        for (j, score) in scores.iter_mut().enumerate() {
            let lm = &log_mu[j];
            *score = log_weights[j]
                + row
                    .nonzeros()
                    .iter()
                    .map(|&(d, c)| c as f64 * lm[d as usize])
                    .sum::<f64>();
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(MmError::InvalidModel(format!(
                "sample {i} has zero density under every component"
            )));
        }
        let out = &mut values[i * k..(i + 1) * k];
        let mut sum = 0.0;
        for (o, s) in out.iter_mut().zip(&scores) {
            *o = (s - max).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
        total += max + sum.ln();
    }
    Ok((ResponsibilityMatrix::from_raw(data.n(), k, values), total))
}

/// Re-estimates weights and floored component parameters from responsibilities.
///
/// A component with zero responsibility-weighted count is re-seeded at the
/// global term frequencies with multiplicative noise drawn from `rng`, and
/// given weight `1/N` before the weights are renormalized.
pub fn m_step<R: Rng + ?Sized>(
    data: &CountDataset,
    resp: &ResponsibilityMatrix,
    prob_floor: f64,
    rng: &mut R,
) -> Result<MixtureModel> {
    if resp.n() != data.n() {
        return Err(MmError::DimensionMismatch {
            expected: data.n(),
            got: resp.n(),
        });
    }
    let k = resp.k();
    let dim = data.dim();
    let n = data.n() as f64;
    let mut weighted = vec![vec![0.0; dim]; k];
    for (row, r) in data.rows().iter().zip(resp.rows()) {
        for (j, &rho) in r.iter().enumerate() {
            if rho == 0.0 {
                continue;
            }
            let w = &mut weighted[j];
            for &(d, c) in row.nonzeros() {
                w[d as usize] += rho * c as f64;
            }
        }
    }

    let mut weights: Vec<f64> = resp.column_sums().iter().map(|s| s / n).collect();
    let mut components = Vec::with_capacity(k);
    let mut global: Option<Vec<f64>> = None;
    for (j, w) in weighted.iter().enumerate() {
        let mass: f64 = w.iter().sum();
        let probs = if mass >= f64::MIN_POSITIVE {
            floor_to_simplex(w, prob_floor)
        } else {
            let g = global.get_or_insert_with(|| data.global_frequencies());
            let noisy: Vec<f64> = g
                .iter()
                .map(|p| p * rng.random_range(0.9..1.1))
                .collect();
            weights[j] = 1.0 / n;
            floor_to_simplex(&noisy, prob_floor)
        };
        components.push(ProbVector::from_floored(probs));
    }
    MixtureModel::normalized(weights, components)
}

/// What happens to the responsibilities between the E and M steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepKind {
    /// Plain EM.
    Soft,
    /// Classification EM: each row becomes one-hot at its argmax.
    Classification,
    /// Stochastic EM: each row becomes a one-hot categorical draw.
    Stochastic,
}

pub fn em_fit(data: &CountDataset, init: &MixtureModel, config: &EmConfig) -> Result<FitResult> {
    run_em(data, init, config, StepKind::Soft)
}

fn stochastic_assign(resp: &ResponsibilityMatrix, rng: &mut SeededRng) -> ResponsibilityMatrix {
    let k = resp.k();
    let mut values = vec![0.0; resp.n() * k];
    for (i, row) in resp.rows().enumerate() {
        values[i * k + sample_categorical(rng, row)] = 1.0;
    }
    ResponsibilityMatrix::from_raw(resp.n(), k, values)
}

/// Shared EM loop.
///
/// Soft and classification runs stop once the absolute log-likelihood change
/// drops below the tolerance. Stochastic runs always use the full iteration
/// budget and return the iterate with the highest log-likelihood.
pub(crate) fn run_em(
    data: &CountDataset,
    init: &MixtureModel,
    config: &EmConfig,
    kind: StepKind,
) -> Result<FitResult> {
    config.validate(data.dim())?;
    data.check_dim(init.dim())?;
    let start = Instant::now();
    let mut rng = rng_from_seed(config.seed);
    let offset = if config.include_coefficient {
        dataset_log_coefficient(data)
    } else {
        0.0
    };

    let mut model = init.clone();
    let (mut resp, ll0) = e_step_with_likelihood(data, &model)?;
    let mut ll = ll0 + offset;
    let mut trace = vec![ll];
    let mut best: Option<(f64, MixtureModel, ResponsibilityMatrix)> = None;
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=config.max_iterations {
        let next = match kind {
            StepKind::Soft => m_step(data, &resp, config.prob_floor, &mut rng)?,
            StepKind::Classification => {
                m_step(data, &resp.harden(), config.prob_floor, &mut rng)?
            }
            StepKind::Stochastic => {
                let drawn = stochastic_assign(&resp, &mut rng);
                m_step(data, &drawn, config.prob_floor, &mut rng)?
            }
        };
        let (next_resp, next_ll) = e_step_with_likelihood(data, &next)?;
        let next_ll = next_ll + offset;
        trace.push(next_ll);
        iterations = it;
        if kind == StepKind::Stochastic {
            if best.as_ref().is_none_or(|b| next_ll > b.0) {
                best = Some((next_ll, next.clone(), next_resp.clone()));
            }
        }
        let delta = (next_ll - ll).abs();
        model = next;
        resp = next_resp;
        ll = next_ll;
        if kind != StepKind::Stochastic && delta < config.tolerance {
            converged = true;
            break;
        }
    }
    if let Some((best_ll, best_model, best_resp)) = best {
        if best_ll > ll {
            ll = best_ll;
            model = best_model;
            resp = best_resp;
        }
    }

    if !ll.is_finite() {
        return Err(MmError::InvalidModel(format!(
            "log-likelihood is not finite ({ll})"
        )));
    }
    Ok(FitResult {
        model,
        log_likelihood: ll,
        responsibilities: resp,
        iterations,
        converged,
        elapsed: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// Evaluates a fixed model on data without iterating.
pub fn evaluate_model(
    data: &CountDataset,
    model: MixtureModel,
    include_coefficient: bool,
) -> Result<(f64, ResponsibilityMatrix)> {
    let (resp, mut ll) = e_step_with_likelihood(data, &model)?;
    if include_coefficient {
        ll += dataset_log_coefficient(data);
    }
    Ok((ll, resp))
}
