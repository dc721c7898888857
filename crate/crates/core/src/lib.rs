//! Model-based clustering of count data with multinomial mixtures.
//!
//! The crate covers EM estimation, five EM initialization strategies, three
//! ways to generate candidate models over `K = 1..K_max` (independent fits,
//! a single shrinking EM, and EM followed by agglomerative merging of the
//! fitted components), model selection by BIC, ICL, MML, raw likelihood or
//! the L-method, a synthetic data generator, and a benchmark harness.

pub mod em;
pub mod error;
pub mod eval;
pub mod init;
pub mod io;
pub mod modelgen;
pub mod modelsel;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod types;

pub use em::{em_fit, e_step, m_step, mixture_log_likelihood, EmConfig, FitResult};
pub use error::{MmError, Result};
pub use eval::{ari, run_benchmark, stability, BenchmarkGrid, BenchmarkReport, MethodTuple};
pub use init::{initialize, InitConfig, InitStrategy};
pub use modelgen::{em_hac, int_em, mul_em, skld, CandidateModelSet, GenerationMethod};
pub use modelsel::{select_model, Criterion, CriterionCurve};
pub use pipeline::{cluster, ClusteringOutcome, PipelineConfig};
pub use synth::{Separation, SynthSpec};
pub use types::{CountDataset, CountVector, MixtureModel, ProbVector, ResponsibilityMatrix};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
