//! Clustering metrics and the benchmark harness.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::EmConfig;
use crate::error::{MmError, Result};
use crate::init::{InitConfig, InitStrategy};
use crate::modelgen::GenerationMethod;
use crate::modelsel::Criterion;
use crate::pipeline::{cluster, PipelineConfig, DEFAULT_K_MAX, DEFAULT_K_MIN};
use crate::rng::sub_seed;
use crate::synth::{generate, SynthSpec};
use crate::types::CountDataset;

fn choose2(n: u64) -> f64 {
    (n as f64) * (n.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand Index between two labelings of the same items.
///
/// Label values are opaque; only the induced partitions matter. When both
/// partitions are trivial in the same way (all singletons or one block) the
/// chance-corrected denominator vanishes and the index is 1 for identical
/// partitions.
pub fn ari<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if a.len() != b.len() {
        return Err(MmError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(MmError::InvalidData("ARI needs at least 2 items".into()));
    }
    let mut table: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Sample standard deviation (`n - 1` denominator).
pub fn stability(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(MmError::InvalidData(
            "stability needs at least 2 values".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodTuple {
    pub init: InitStrategy,
    pub generation: GenerationMethod,
    pub selection: Criterion,
}

impl MethodTuple {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.init, self.generation, self.selection)
    }
}

/// Where a benchmark dataset comes from: a generator spec or files on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(default)]
    pub synthetic: Option<SynthSpec>,
    /// Generate this many datasets from the spec, seeds `sub_seed(spec.seed, r)`.
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkGrid {
    pub datasets: Vec<DatasetEntry>,
    pub methods: Vec<MethodTuple>,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub em: EmConfig,
    /// Overrides the per-strategy default trial count.
    #[serde(default)]
    pub init_trials: Option<usize>,
    /// Overrides the per-strategy default short-run iteration cap.
    #[serde(default)]
    pub init_iterations: Option<usize>,
}

fn default_k_min() -> usize {
    DEFAULT_K_MIN
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

impl BenchmarkGrid {
    /// Parses a grid; schema errors name the offending JSON path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let grid: Self = serde_path_to_error::deserialize(de).map_err(|e| MmError::Schema {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |path: String, msg: &str| MmError::Schema {
            path,
            msg: msg.to_string(),
        };
        if self.datasets.is_empty() {
            return Err(schema("datasets".into(), "at least one dataset required"));
        }
        if self.methods.is_empty() {
            return Err(schema("methods".into(), "at least one method required"));
        }
        for (i, d) in self.datasets.iter().enumerate() {
            match (&d.synthetic, &d.path) {
                (Some(spec), None) => spec
                    .validate()
                    .map_err(|e| schema(format!("datasets[{i}].synthetic"), &e.to_string()))?,
                (None, Some(_)) => {}
                _ => {
                    return Err(schema(
                        format!("datasets[{i}]"),
                        "exactly one of `synthetic` or `path` is required",
                    ))
                }
            }
            if d.replicates == Some(0) {
                return Err(schema(format!("datasets[{i}].replicates"), "must be >= 1"));
            }
        }
        if self.k_min > self.k_max || self.k_max == 0 {
            return Err(schema("k_max".into(), "need 1 <= k_min <= k_max"));
        }
        Ok(())
    }

    fn pipeline(&self, method: &MethodTuple) -> PipelineConfig {
        let mut init = InitConfig::new(method.init, 0);
        if let Some(t) = self.init_trials {
            init.trials = t;
        }
        if let Some(it) = self.init_iterations {
            init.short_run_iterations = it;
        }
        PipelineConfig {
            init,
            em: self.em.clone(),
            generation: method.generation,
            criterion: method.selection,
            k_min: self.k_min,
            k_max: self.k_max,
        }
    }
}

/// A materialized benchmark dataset.
#[derive(Debug, Clone)]
pub struct BenchDataset {
    pub name: String,
    pub data: CountDataset,
    pub true_k: Option<usize>,
}

fn distinct(labels: &[usize]) -> usize {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

pub fn materialize(grid: &BenchmarkGrid) -> Result<Vec<BenchDataset>> {
    let mut out = Vec::new();
    for entry in &grid.datasets {
        if let Some(spec) = &entry.synthetic {
            match entry.replicates {
                None => {
                    let s = generate(spec)?;
                    out.push(BenchDataset {
                        name: entry.name.clone(),
                        data: s.dataset,
                        true_k: Some(spec.k),
                    });
                }
                Some(r) => {
                    for rep in 0..r {
                        let spec = SynthSpec {
                            seed: sub_seed(spec.seed, rep as u64),
                            ..spec.clone()
                        };
                        let s = generate(&spec)?;
                        out.push(BenchDataset {
                            name: format!("{}#{rep}", entry.name),
                            data: s.dataset,
                            true_k: Some(spec.k),
                        });
                    }
                }
            }
        } else if let Some(path) = &entry.path {
            let data = crate::io::load_dataset(path, entry.labels.as_ref())?;
            let true_k = data.labels().map(distinct);
            out.push(BenchDataset {
                name: entry.name.clone(),
                data,
                true_k,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: MethodTuple,
    pub repeat: usize,
    pub seed: u64,
    /// ARI of the selected model against the true labels.
    pub ari: Option<f64>,
    /// ARI of the candidate with the true number of clusters.
    pub ari_true_k: Option<f64>,
    pub selected_k: usize,
    pub true_k: Option<usize>,
    /// Seconds spent initializing and generating candidates.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub dataset: String,
    pub method: MethodTuple,
    pub repeat: usize,
    pub error: String,
}

/// Aggregates over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    /// Mean ARI of the selected model (accuracy).
    pub mean_ari: Option<f64>,
    /// Standard deviation of that ARI (stability); needs 2 runs.
    pub std_ari: Option<f64>,
    pub mean_ari_true_k: Option<f64>,
    pub std_ari_true_k: Option<f64>,
    pub mean_time: f64,
    pub correct_k_rate: Option<f64>,
}

impl Summary {
    pub fn of(records: &[&RunRecord]) -> Self {
        let aris: Vec<f64> = records.iter().filter_map(|r| r.ari).collect();
        let aris_k: Vec<f64> = records.iter().filter_map(|r| r.ari_true_k).collect();
        let times: Vec<f64> = records.iter().map(|r| r.elapsed).collect();
        let judged: Vec<bool> = records
            .iter()
            .filter_map(|r| r.true_k.map(|k| k == r.selected_k))
            .collect();
        Self {
            runs: records.len(),
            mean_ari: mean(&aris),
            std_ari: stability(&aris).ok(),
            mean_ari_true_k: mean(&aris_k),
            std_ari_true_k: stability(&aris_k).ok(),
            mean_time: mean(&times).unwrap_or(0.0),
            correct_k_rate: (!judged.is_empty())
                .then(|| judged.iter().filter(|&&c| c).count() as f64 / judged.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub method: MethodTuple,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodTuple,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub repeats: usize,
    pub version: String,
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub cells: Vec<CellSummary>,
    pub methods: Vec<MethodSummary>,
}

impl BenchmarkReport {
    pub fn cell(&self, dataset: &str, method: &MethodTuple) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && &c.method == method)
    }

    pub fn method(&self, method: &MethodTuple) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| &m.method == method)
    }

    /// One row per run record.
    pub fn to_csv(&self) -> String {
        fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut out = String::from(
            "dataset,init,generation,selection,repeat,seed,ari,ari_true_k,selected_k,true_k,elapsed\n",
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.dataset,
                r.method.init,
                r.method.generation,
                r.method.selection,
                r.repeat,
                r.seed,
                opt(r.ari),
                opt(r.ari_true_k),
                r.selected_k,
                opt(r.true_k),
                r.elapsed
            );
        }
        out
    }
}

/// Worker count from `MMCLUST_THREADS`; 0 or unset means automatic.
pub fn configured_threads() -> usize {
    std::env::var("MMCLUST_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Runs one pipeline instance and scores it against the dataset's labels.
pub fn run_once(
    ds: &BenchDataset,
    method: &MethodTuple,
    base: &PipelineConfig,
    repeat: usize,
    seed: u64,
) -> Result<RunRecord> {
    let cfg = base.clone().with_seed(seed);
    let out = cluster(&ds.data, &cfg)?;
    let labels = ds.data.labels();
    let ari_sel = labels.map(|l| ari(l, &out.assignments)).transpose()?;
    let ari_true_k = match (labels, ds.true_k.and_then(|k| out.candidates.get(k))) {
        (Some(l), Some(fit)) => Some(ari(l, &fit.assignments())?),
        _ => None,
    };
    Ok(RunRecord {
        dataset: ds.name.clone(),
        method: *method,
        repeat,
        seed,
        ari: ari_sel,
        ari_true_k,
        selected_k: out.selection.k,
        true_k: ds.true_k,
        elapsed: out.candidates.total_elapsed,
    })
}

/// Runs every (dataset, method) cell `repeats` times.
///
/// Repeat `r` on dataset `j` uses seed `sub_seed(sub_seed(seed, j), r)` for
/// every method, so methods are compared from the same initializations.
/// Cells run concurrently; repeats within a cell run sequentially.
pub fn run_benchmark(grid: &BenchmarkGrid, repeats: usize, seed: u64) -> Result<BenchmarkReport> {
    if repeats == 0 {
        return Err(MmError::InvalidConfig("repeats must be >= 1".into()));
    }
    grid.validate()?;
    let datasets = materialize(grid)?;
    run_benchmark_on(&datasets, grid, repeats, seed)
}

pub fn run_benchmark_on(
    datasets: &[BenchDataset],
    grid: &BenchmarkGrid,
    repeats: usize,
    seed: u64,
) -> Result<BenchmarkReport> {
    let cells: Vec<(usize, &MethodTuple)> = (0..datasets.len())
        .flat_map(|j| grid.methods.iter().map(move |m| (j, m)))
        .collect();
    let run_cell = |&(j, method): &(usize, &MethodTuple)| {
        let ds = &datasets[j];
        let base = grid.pipeline(method);
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for r in 0..repeats {
            let s = sub_seed(sub_seed(seed, j as u64), r as u64);
            match run_once(ds, method, &base, r, s) {
                Ok(rec) => records.push(rec),
                Err(e) => failures.push(RunFailure {
                    dataset: ds.name.clone(),
                    method: *method,
                    repeat: r,
                    error: e.to_string(),
                }),
            }
        }
        (records, failures)
    };
    let threads = configured_threads();
    let results: Vec<(Vec<RunRecord>, Vec<RunFailure>)> = if threads == 0 {
        cells.par_iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| MmError::InvalidConfig(e.to_string()))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut cell_summaries = Vec::new();
    for ((j, method), (recs, fails)) in cells.iter().zip(results) {
        cell_summaries.push(CellSummary {
            dataset: datasets[*j].name.clone(),
            method: **method,
            summary: Summary::of(&recs.iter().collect::<Vec<_>>()),
        });
        records.extend(recs);
        failures.extend(fails);
    }
    let methods = grid
        .methods
        .iter()
        .map(|m| MethodSummary {
            method: *m,
            summary: Summary::of(&records.iter().filter(|r| &r.method == m).collect::<Vec<_>>()),
        })
        .collect();
    Ok(BenchmarkReport {
        seed,
        repeats,
        version: crate::VERSION.to_string(),
        records,
        failures,
        cells: cell_summaries,
        methods,
    })
}
