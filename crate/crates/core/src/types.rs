//! Count data, probability vectors and multinomial mixture parameters.

use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};

/// Default lower bound applied to every multinomial parameter entry.
pub const DEFAULT_PROB_FLOOR: f64 = 1e-10;

/// Tolerance used when checking that weights or probabilities sum to one.
pub const SUM_TOLERANCE: f64 = 1e-10;

/// A `D`-dimensional vector of non-negative counts, stored as its nonzero entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountVector {
    dim: usize,
    /// Strictly increasing column indices (0-based) with positive counts.
    entries: Vec<(u32, u32)>,
    order: u64,
}

impl CountVector {
    pub fn from_dense(counts: &[u32]) -> Result<Self> {
        if counts.is_empty() {
            return Err(MmError::InvalidData("count vector must have D >= 1".into()));
        }
        let entries: Vec<(u32, u32)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(d, &c)| (d as u32, c))
            .collect();
        let order = entries.iter().map(|&(_, c)| c as u64).sum();
        Ok(Self {
            dim: counts.len(),
            entries,
            order,
        })
    }

    /// Builds a vector from `(index, count)` pairs. Zero counts are dropped;
    /// repeated or out-of-range indices are rejected.
    pub fn from_sparse(dim: usize, mut pairs: Vec<(u32, u32)>) -> Result<Self> {
        if dim == 0 {
            return Err(MmError::InvalidData("count vector must have D >= 1".into()));
        }
        pairs.retain(|&(_, c)| c > 0);
        pairs.sort_unstable_by_key(|&(d, _)| d);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(MmError::InvalidData(format!(
                    "duplicate column index {}",
                    w[0].0 as usize + 1
                )));
            }
        }
        if let Some(&(d, _)) = pairs.last() {
            if d as usize >= dim {
                return Err(MmError::InvalidData(format!(
                    "column index {} out of range 1..={dim}",
                    d as usize + 1
                )));
            }
        }
        let order = pairs.iter().map(|&(_, c)| c as u64).sum();
        Ok(Self {
            dim,
            entries: pairs,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sum of all counts (the multinomial order `V`).
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn nonzeros(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn get(&self, d: usize) -> u32 {
        match self.entries.binary_search_by_key(&(d as u32), |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0,
        }
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut out = vec![0; self.dim];
        for &(d, c) in &self.entries {
            out[d as usize] = c;
        }
        out
    }
}

/// `N` count vectors sharing one dimension, with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDataset {
    rows: Vec<CountVector>,
    labels: Option<Vec<usize>>,
}

impl CountDataset {
    pub fn new(rows: Vec<CountVector>) -> Result<Self> {
        let first = rows.first().ok_or(MmError::EmptyDataset)?;
        let dim = first.dim();
        for row in &rows {
            if row.dim() != dim {
                return Err(MmError::DimensionMismatch {
                    expected: dim,
                    got: row.dim(),
                });
            }
        }
        Ok(Self { rows, labels: None })
    }

    pub fn from_dense(rows: &[Vec<u32>]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| CountVector::from_dense(r))
                .collect::<Result<_>>()?,
        )
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.rows.len() {
            return Err(MmError::InvalidData(format!(
                "{} labels for {} samples",
                labels.len(),
                self.rows.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn rows(&self) -> &[CountVector] {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.nonzeros().len()).sum()
    }

    /// Per-column totals over all rows.
    pub fn column_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.dim()];
        for row in &self.rows {
            for &(d, c) in row.nonzeros() {
                totals[d as usize] += c as f64;
            }
        }
        totals
    }

    /// Pooled term frequencies, or the uniform vector when every row is empty.
    pub fn global_frequencies(&self) -> Vec<f64> {
        let totals = self.column_totals();
        let sum: f64 = totals.iter().sum();
        if sum > 0.0 {
            totals.iter().map(|t| t / sum).collect()
        } else {
            vec![1.0 / self.dim() as f64; self.dim()]
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(MmError::DimensionMismatch {
                expected: self.dim(),
                got: dim,
            });
        }
        Ok(())
    }
}

/// A probability vector whose entries are bounded below by a floor `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    /// Validates a probability vector and applies the default floor.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_floor(probs, DEFAULT_PROB_FLOOR)
    }

    pub fn with_floor(probs: Vec<f64>, floor: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(MmError::InvalidModel("probability vector is empty".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(MmError::InvalidModel(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(MmError::InvalidModel(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Self::from_weights(probs, floor)
    }

    /// Normalizes arbitrary non-negative weights onto the floored simplex.
    pub fn from_weights(weights: Vec<f64>, floor: f64) -> Result<Self> {
        let dim = weights.len();
        if dim == 0 {
            return Err(MmError::InvalidModel("probability vector is empty".into()));
        }
        if !(floor > 0.0 && floor * (dim as f64) < 1.0) {
            return Err(MmError::InvalidConfig(format!(
                "probability floor {floor} must lie in (0, 1/D) for D={dim}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MmError::InvalidModel(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            probs: floor_to_simplex(&weights, floor),
        })
    }

    /// Wraps an already-floored vector produced by [`floor_to_simplex`].
    pub(crate) fn from_floored(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            probs: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

/// Maximizes `Σ w_d log μ_d` over `{μ : Σ μ = 1, μ_d >= floor}`.
///
/// The maximizer is `μ_d = max(floor, w_d / λ)`; entries are clamped one
/// round at a time until the free set is stable. Zero total weight maps to
/// the uniform vector.
pub(crate) fn floor_to_simplex(weights: &[f64], floor: f64) -> Vec<f64> {
    let dim = weights.len();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / dim as f64; dim];
    }
    let mut clamped = vec![false; dim];
    loop {
        let n_clamped = clamped.iter().filter(|&&c| c).count();
        let free_mass = 1.0 - floor * n_clamped as f64;
        let free_weight: f64 = weights
            .iter()
            .zip(&clamped)
            .filter(|(_, &c)| !c)
            .map(|(w, _)| *w)
            .sum();
        let scale = free_mass / free_weight;
        let mut changed = false;
        for d in 0..dim {
            if !clamped[d] && weights[d] * scale < floor {
                clamped[d] = true;
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<f64> = weights
                .iter()
                .zip(&clamped)
                .map(|(w, &c)| if c { floor } else { w * scale })
                .collect();
            // Put rounding residue on the largest entry.
            let residue = 1.0 - out.iter().sum::<f64>();
            let (imax, _) = out
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            out[imax] += residue;
            return out;
        }
    }
}

/// Mixing weights and component parameters of a `K`-component multinomial mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    weights: Vec<f64>,
    components: Vec<ProbVector>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<ProbVector>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MmError::InvalidModel("mixture needs K >= 1".into()));
        }
        if weights.len() != components.len() {
            return Err(MmError::InvalidModel(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MmError::InvalidModel(
                "mixing weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(MmError::InvalidModel(format!(
                "mixing weights sum to {sum}, expected 1"
            )));
        }
        let dim = components[0].dim();
        for c in &components {
            if c.dim() != dim {
                return Err(MmError::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// Like [`MixtureModel::new`] but rescales the weights to sum to one first.
    pub fn normalized(weights: Vec<f64>, components: Vec<ProbVector>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(MmError::InvalidModel(format!(
                "mixing weights sum to {sum}"
            )));
        }
        let mut weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        if let Some((imax, _)) = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            let residue = 1.0 - weights.iter().sum::<f64>();
            weights[imax] += residue;
        }
        Self::new(weights, components)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ProbVector] {
        &self.components
    }

    /// Drops component `k` and renormalizes the remaining weights.
    pub fn without_component(&self, k: usize) -> Result<Self> {
        if self.k() < 2 || k >= self.k() {
            return Err(MmError::InvalidModel(format!(
                "cannot remove component {k} from a {}-component mixture",
                self.k()
            )));
        }
        let mut weights = self.weights.clone();
        let mut components = self.components.clone();
        weights.remove(k);
        components.remove(k);
        Self::normalized(weights, components)
    }
}

/// Row-stochastic `N × K` matrix of posterior component memberships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilityMatrix {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl ResponsibilityMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(MmError::EmptyDataset);
        }
        let k = rows[0].len();
        let mut values = Vec::with_capacity(n * k);
        for row in rows {
            if row.len() != k {
                return Err(MmError::DimensionMismatch {
                    expected: k,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(MmError::InvalidModel(
                    "responsibilities must lie in [0, 1]".into(),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(MmError::InvalidModel(format!(
                    "responsibility row sums to {sum}"
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { n, k, values })
    }

    pub(crate) fn from_raw(n: usize, k: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * k);
        Self { n, k, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.k)
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.k + k]
    }

    /// Column sums `Σ_i ρ_{i,k}`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k];
        for row in self.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// Index of the largest entry per row; ties go to the lowest index.
    pub fn hard_assignments(&self) -> Vec<usize> {
        self.rows().map(argmax_lowest).collect()
    }

    /// Replaces every row by the one-hot vector at its argmax.
    pub fn harden(&self) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (i, row) in self.rows().enumerate() {
            values[i * self.k + argmax_lowest(row)] = 1.0;
        }
        Self::from_raw(self.n, self.k, values)
    }
}

/// First index attaining the maximum.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
