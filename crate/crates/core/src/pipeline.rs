//! The full clustering method: initialize and fit at `K_max`, generate the
//! candidate hierarchy, then select `K_o`.

use serde::{Deserialize, Serialize};

use crate::em::{EmConfig, FitResult};
use crate::error::{MmError, Result};
use crate::init::{InitConfig, InitStrategy};
use crate::modelgen::{generate_candidates, CandidateModelSet, GenerationMethod};
use crate::modelsel::{select_model, Criterion, Selection};
use crate::types::CountDataset;

pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub init: InitConfig,
    pub em: EmConfig,
    pub generation: GenerationMethod,
    pub criterion: Criterion,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            init: InitConfig::new(InitStrategy::SmEm, 0),
            em: EmConfig::default(),
            generation: GenerationMethod::EmHac,
            criterion: Criterion::Bic,
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
        }
    }
}

impl PipelineConfig {
    /// Sets both the initialization and EM seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init.seed = seed;
        self.em.seed = crate::rng::sub_seed(seed, 0xE);
        self
    }

    /// Checks flag combinations that would fail only after fitting.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        self.init.validate()?;
        if self.k_max == 0 {
            return Err(MmError::InvalidConfig("K_max must be >= 1".into()));
        }
        if self.k_min > self.k_max {
            return Err(MmError::InvalidConfig(format!(
                "K_min={} exceeds K_max={}",
                self.k_min, self.k_max
            )));
        }
        if self.generation == GenerationMethod::EmHac && self.k_max < 2 {
            return Err(MmError::InvalidConfig("em-hac needs K_max >= 2".into()));
        }
        if self.criterion == Criterion::LMethod && self.k_max < 4 {
            return Err(MmError::InvalidConfig(format!(
                "l-method needs K_max >= 4, got {}",
                self.k_max
            )));
        }
        if let Some(n) = n {
            if self.k_max > n {
                return Err(MmError::TooManyComponents { k: self.k_max, n });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringOutcome {
    pub candidates: CandidateModelSet,
    pub selection: Selection,
    /// 1-based hard assignments under the selected model.
    pub assignments: Vec<usize>,
}

impl ClusteringOutcome {
    pub fn selected(&self) -> &FitResult {
        &self.candidates.entries[&self.selection.k]
    }
}

pub fn cluster(data: &CountDataset, config: &PipelineConfig) -> Result<ClusteringOutcome> {
    config.em.validate(data.dim())?;
    config.validate(Some(data.n()))?;
    let candidates = generate_candidates(
        config.generation,
        data,
        config.k_max,
        &config.init,
        &config.em,
    )?;
    let (selection, fit) = select_model(&candidates, config.criterion, config.k_min, data.n())?;
    let assignments = fit.assignments().into_iter().map(|a| a + 1).collect();
    Ok(ClusteringOutcome {
        candidates,
        selection,
        assignments,
    })
}
