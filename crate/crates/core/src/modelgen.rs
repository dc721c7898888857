//! Candidate model generation over `K = 1..K_max`.
//!
//! - Mul-EM: an independent initialization and EM fit for every `K`.
//! - Int-EM: one EM process that annihilates the lightest component after
//!   each convergence and continues with the survivors.
//! - EM-HAC: one EM fit at `K_max`, then agglomerative merging of its
//!   components by complete-linkage symmetric KL divergence.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::em::{em_fit, evaluate_model, EmConfig, FitResult};
use crate::error::{MmError, Result};
use crate::init::{initialize, InitConfig};
use crate::rng::sub_seed;
use crate::types::{CountDataset, MixtureModel, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMethod {
    MulEm,
    IntEm,
    EmHac,
}

impl GenerationMethod {
    pub const ALL: [GenerationMethod; 3] = [
        GenerationMethod::MulEm,
        GenerationMethod::IntEm,
        GenerationMethod::EmHac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GenerationMethod::MulEm => "mul-em",
            GenerationMethod::IntEm => "int-em",
            GenerationMethod::EmHac => "em-hac",
        }
    }
}

impl fmt::Display for GenerationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GenerationMethod {
    type Err = MmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mul-em" | "mulem" => Ok(GenerationMethod::MulEm),
            "int-em" | "intem" => Ok(GenerationMethod::IntEm),
            "em-hac" | "emhac" => Ok(GenerationMethod::EmHac),
            other => Err(MmError::InvalidConfig(format!(
                "unknown generation method `{other}` (expected mul-em, int-em, em-hac)"
            ))),
        }
    }
}

/// One agglomeration in the EM-HAC hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    /// Original component indices of the two merged clusters.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub weight: f64,
    pub params: Vec<f64>,
    /// Complete-linkage dissimilarity at which the merge happened.
    pub dissimilarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateModelSet {
    pub method: GenerationMethod,
    pub entries: BTreeMap<usize, FitResult>,
    /// Wall-clock seconds, initialization included.
    pub total_elapsed: f64,
    /// Values of `K` that could not be fitted, with a diagnostic.
    pub failures: Vec<(usize, String)>,
    /// EM-HAC merge sequence, empty for the other methods.
    pub merges: Vec<MergeStep>,
}

impl CandidateModelSet {
    pub fn get(&self, k: usize) -> Option<&FitResult> {
        self.entries.get(&k)
    }

    pub fn ks(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn k_max(&self) -> Option<usize> {
        self.entries.keys().next_back().copied()
    }
}

/// Symmetric Kullback-Leibler divergence `(KL(a‖b) + KL(b‖a)) / 2`, in nats.
pub fn skld(a: &ProbVector, b: &ProbVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(MmError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    // KL(a‖b) + KL(b‖a) = Σ (a_d - b_d)(ln a_d - ln b_d), with every term >= 0.
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&p, &q)| (p - q) * (p.ln() - q.ln()))
        .sum();
    Ok(sum / 2.0)
}

/// Combines `(weight, params)` pairs into their weight-averaged parameters.
pub fn merge_components(parts: &[(f64, &ProbVector)]) -> Result<(f64, ProbVector)> {
    let first = parts
        .first()
        .ok_or_else(|| MmError::InvalidModel("nothing to merge".into()))?;
    if parts.len() == 1 {
        return Ok((first.0, first.1.clone()));
    }
    let dim = first.1.dim();
    let total: f64 = parts.iter().map(|p| p.0).sum();
    if total > 1.0 + 1e-10 {
        return Err(MmError::InvalidModel(format!(
            "merged weight {total} exceeds 1"
        )));
    }
    if !(total > 0.0) {
        return Err(MmError::DegenerateMerge);
    }
    let mut params = vec![0.0; dim];
    for (w, mu) in parts {
        if mu.dim() != dim {
            return Err(MmError::DimensionMismatch {
                expected: dim,
                got: mu.dim(),
            });
        }
        for (acc, p) in params.iter_mut().zip(mu.as_slice()) {
            *acc += w * p;
        }
    }
    for p in params.iter_mut() {
        *p /= total;
    }
    // A convex combination of floored vectors is already floored; this only
    // absorbs rounding in the sum.
    let floor = parts
        .iter()
        .flat_map(|(_, mu)| mu.as_slice().iter().cloned())
        .fold(f64::INFINITY, f64::min)
        .min(crate::types::DEFAULT_PROB_FLOOR);
    Ok((total, ProbVector::from_weights(params, floor)?))
}

/// Complete linkage: the largest pairwise dissimilarity between members of `a` and `b`.
pub fn complete_linkage(dissim: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let mut max = f64::NEG_INFINITY;
    for &i in a {
        for &j in b {
            max = max.max(dissim[i][j]);
        }
    }
    max
}

/// Pairwise sKLD between the components of a mixture.
pub fn skld_matrix(model: &MixtureModel) -> Vec<Vec<f64>> {
    let comps = model.components();
    let k = comps.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let v = skld(&comps[i], &comps[j]).expect("components share D");
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

fn check_k_max(data: &CountDataset, k_max: usize, min: usize) -> Result<()> {
    if k_max < min {
        return Err(MmError::InvalidConfig(format!("K_max must be >= {min}")));
    }
    if k_max > data.n() {
        return Err(MmError::TooManyComponents {
            k: k_max,
            n: data.n(),
        });
    }
    Ok(())
}

fn fit_from_scratch(
    data: &CountDataset,
    k: usize,
    init: &InitConfig,
    em: &EmConfig,
) -> Result<FitResult> {
    let start = Instant::now();
    let outcome = initialize(data, k, init, em)?;
    let mut fit = em_fit(data, &outcome.model, em)?;
    fit.elapsed = start.elapsed().as_secs_f64();
    Ok(fit)
}

/// Independent fits for `K = 1..=k_max`; fit `K` uses init seed `sub_seed(seed, K)`.
pub fn mul_em(
    data: &CountDataset,
    k_max: usize,
    init: &InitConfig,
    em: &EmConfig,
) -> Result<CandidateModelSet> {
    if k_max == 0 {
        return Err(MmError::InvalidConfig("K_max must be >= 1".into()));
    }
    init.validate()?;
    em.validate(data.dim())?;
    let start = Instant::now();
    let mut entries = BTreeMap::new();
    let mut failures = Vec::new();
    for k in 1..=k_max {
        let init_k = init.with_seed(sub_seed(init.seed, k as u64));
        let em_k = em.with_seed(sub_seed(em.seed, k as u64));
        match fit_from_scratch(data, k, &init_k, &em_k) {
            Ok(fit) => {
                entries.insert(k, fit);
            }
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    Ok(CandidateModelSet {
        method: GenerationMethod::MulEm,
        entries,
        total_elapsed: start.elapsed().as_secs_f64(),
        failures,
        merges: Vec::new(),
    })
}

/// Index of the smallest weight, lowest index on ties.
fn lightest_component(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, w) in weights.iter().enumerate().skip(1) {
        if *w < weights[best] {
            best = i;
        }
    }
    best
}

/// Single shrinking EM process from `k_max` down to one component.
pub fn int_em(
    data: &CountDataset,
    k_max: usize,
    init: &InitConfig,
    em: &EmConfig,
) -> Result<CandidateModelSet> {
    check_k_max(data, k_max, 1)?;
    em.validate(data.dim())?;
    let start = Instant::now();
    let mut entries = BTreeMap::new();
    let mut fit = fit_from_scratch(data, k_max, init, em)?;
    entries.insert(k_max, fit.clone());
    for k in (1..k_max).rev() {
        let stage_start = Instant::now();
        let drop = lightest_component(fit.model.weights());
        let reduced = fit.model.without_component(drop)?;
        fit = em_fit(data, &reduced, em)?;
        fit.elapsed = stage_start.elapsed().as_secs_f64();
        entries.insert(k, fit.clone());
    }
    Ok(CandidateModelSet {
        method: GenerationMethod::IntEm,
        entries,
        total_elapsed: start.elapsed().as_secs_f64(),
        failures: Vec::new(),
        merges: Vec::new(),
    })
}

/// Agglomerative merge hierarchy over the components of one fitted mixture.
///
/// Returns the merge sequence; after merge `m` there are `K - m - 1` clusters.
/// Cluster dissimilarities are complete linkage over the original pairwise
/// sKLD values. Ties go to the pair whose smallest original indices are
/// lexicographically lowest.
pub fn hac_merges(model: &MixtureModel) -> Result<Vec<(Vec<Vec<usize>>, MergeStep)>> {
    let dissim = skld_matrix(model);
    let mut clusters: Vec<Vec<usize>> = (0..model.k()).map(|i| vec![i]).collect();
    let mut out = Vec::with_capacity(model.k().saturating_sub(1));
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let link = complete_linkage(&dissim, &clusters[a], &clusters[b]);
                // Clusters stay sorted by smallest member, so scanning (a, b)
                // in order and replacing only on strict improvement realizes
                // the lexicographic tie rule.
                if best.is_none_or(|(v, _, _)| link < v) {
                    best = Some((link, a, b));
                }
            }
        }
        let (link, a, b) = best.expect("at least two clusters");
        let right = clusters.remove(b);
        let left = clusters[a].clone();
        let mut merged: Vec<usize> = left.iter().chain(&right).copied().collect();
        merged.sort_unstable();
        let parts: Vec<(f64, &ProbVector)> = merged
            .iter()
            .map(|&i| (model.weights()[i], &model.components()[i]))
            .collect();
        let (weight, params) = merge_components(&parts)?;
        clusters[a] = merged;
        out.push((
            clusters.clone(),
            MergeStep {
                left,
                right,
                weight,
                params: params.into_vec(),
                dissimilarity: link,
            },
        ));
    }
    Ok(out)
}

/// Mixture whose components are the weight-averaged merges of `clusters`.
pub fn merged_model(model: &MixtureModel, clusters: &[Vec<usize>]) -> Result<MixtureModel> {
    let mut weights = Vec::with_capacity(clusters.len());
    let mut comps = Vec::with_capacity(clusters.len());
    for c in clusters {
        let parts: Vec<(f64, &ProbVector)> = c
            .iter()
            .map(|&i| (model.weights()[i], &model.components()[i]))
            .collect();
        let (w, mu) = merge_components(&parts)?;
        weights.push(w);
        comps.push(mu);
    }
    MixtureModel::normalized(weights, comps)
}

/// One EM fit at `k_max` followed by agglomerative merging down to `K = 1`.
///
/// Merged models are scored on the data as they are; EM is not re-run.
/// Their `iterations`/`converged` fields echo the `k_max` fit.
pub fn em_hac(
    data: &CountDataset,
    k_max: usize,
    init: &InitConfig,
    em: &EmConfig,
) -> Result<CandidateModelSet> {
    check_k_max(data, k_max, 2)?;
    em.validate(data.dim())?;
    let start = Instant::now();
    let fit = fit_from_scratch(data, k_max, init, em)?;
    let mut entries = BTreeMap::new();
    let mut merges = Vec::new();
    for (clusters, step) in hac_merges(&fit.model)? {
        let stage_start = Instant::now();
        let model = merged_model(&fit.model, &clusters)?;
        let (ll, resp) = evaluate_model(data, model.clone(), em.include_coefficient)?;
        entries.insert(
            clusters.len(),
            FitResult {
                model,
                log_likelihood: ll,
                responsibilities: resp,
                iterations: fit.iterations,
                converged: fit.converged,
                elapsed: stage_start.elapsed().as_secs_f64(),
                trace: vec![ll],
            },
        );
        merges.push(step);
    }
    entries.insert(k_max, fit);
    Ok(CandidateModelSet {
        method: GenerationMethod::EmHac,
        entries,
        total_elapsed: start.elapsed().as_secs_f64(),
        failures: Vec::new(),
        merges,
    })
}

pub fn generate_candidates(
    method: GenerationMethod,
    data: &CountDataset,
    k_max: usize,
    init: &InitConfig,
    em: &EmConfig,
) -> Result<CandidateModelSet> {
    match method {
        GenerationMethod::MulEm => mul_em(data, k_max, init, em),
        GenerationMethod::IntEm => int_em(data, k_max, init, em),
        GenerationMethod::EmHac => em_hac(data, k_max, init, em),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitStrategy;

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    fn small_data() -> CountDataset {
        let rows: Vec<Vec<u32>> = (0..60)
            .map(|i| match i % 3 {
                0 => vec![6, 1, 0, 0, 1],
                1 => vec![0, 1, 6, 1, 0],
                _ => vec![1, 0, 0, 2, 5],
            })
            .collect();
        CountDataset::from_dense(&rows).unwrap()
    }

    fn quick_init(seed: u64) -> InitConfig {
        InitConfig {
            trials: 2,
            short_run_iterations: 10,
            ..InitConfig::new(InitStrategy::SmEm, seed)
        }
    }

    #[test]
    fn skld_hand_value_and_identity() {
        let a = pv(&[0.5, 0.5]);
        let b = pv(&[0.25, 0.75]);
        let v = skld(&a, &b).unwrap();
        assert!((v - 0.1373).abs() < 1e-4, "{v}");
        assert_eq!(skld(&a, &a).unwrap(), 0.0);
        assert_eq!(v, skld(&b, &a).unwrap());
        assert!(skld(&a, &pv(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn merge_hand_value() {
        let a = pv(&[0.2, 0.8]);
        let b = pv(&[0.7, 0.3]);
        let (w, mu) = merge_components(&[(0.3, &a), (0.2, &b)]).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert!((mu.as_slice()[0] - 0.4).abs() < 1e-12);
        assert!((mu.as_slice()[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn merge_singleton_and_identical() {
        let a = pv(&[0.2, 0.8]);
        let (w, mu) = merge_components(&[(0.3, &a)]).unwrap();
        assert_eq!((w, &mu), (0.3, &a));
        let (w, mu) = merge_components(&[(0.1, &a), (0.25, &a)]).unwrap();
        assert!((w - 0.35).abs() < 1e-15);
        for (x, y) in mu.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn merge_errors() {
        let a = pv(&[0.2, 0.8]);
        assert!(matches!(
            merge_components(&[(0.0, &a), (0.0, &a)]).unwrap_err(),
            MmError::DegenerateMerge
        ));
        assert!(merge_components(&[]).is_err());
        assert!(merge_components(&[(0.7, &a), (0.7, &a)]).is_err());
    }

    #[test]
    fn linkage_hand_values() {
        let d = vec![
            vec![0.0, 0.1, 0.2],
            vec![0.1, 0.0, 0.5],
            vec![0.2, 0.5, 0.0],
        ];
        assert_eq!(complete_linkage(&d, &[0], &[1]), 0.1);
        assert_eq!(complete_linkage(&d, &[0, 1], &[2]), 0.5);
        assert_eq!(complete_linkage(&d, &[2], &[0, 1]), 0.5);
    }

    #[test]
    fn hac_merges_twins_first() {
        let m = MixtureModel::normalized(
            vec![1.0, 1.0, 1.0],
            vec![pv(&[0.7, 0.2, 0.1]), pv(&[0.7, 0.2, 0.1]), pv(&[0.05, 0.15, 0.8])],
        )
        .unwrap();
        let merges = hac_merges(&m).unwrap();
        assert_eq!(merges[0].0, vec![vec![0, 1], vec![2]]);
        assert_eq!(merges[0].1.dissimilarity, 0.0);
        assert_eq!(merges[1].0, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn hac_ties_pick_lowest_pair() {
        let c = pv(&[0.5, 0.5]);
        let m = MixtureModel::normalized(vec![1.0; 4], vec![c.clone(), c.clone(), c.clone(), c])
            .unwrap();
        let merges = hac_merges(&m).unwrap();
        assert_eq!(merges[0].1.left, vec![0]);
        assert_eq!(merges[0].1.right, vec![1]);
        assert_eq!(merges[1].1.left, vec![0, 1]);
        assert_eq!(merges[1].1.right, vec![2]);
    }

    #[test]
    fn lightest_component_tie_low() {
        assert_eq!(lightest_component(&[0.6, 0.3, 0.1]), 2);
        assert_eq!(lightest_component(&[0.2, 0.4, 0.2, 0.2]), 0);
    }

    #[test]
    fn mul_em_cardinality_and_k1() {
        let data = small_data();
        let set = mul_em(&data, 4, &quick_init(1), &EmConfig::default()).unwrap();
        assert_eq!(set.ks(), vec![1, 2, 3, 4]);
        let g = data.global_frequencies();
        for (a, b) in set.get(1).unwrap().model.components()[0].as_slice().iter().zip(&g) {
            assert!((a - b).abs() < 1e-9);
        }
        let per_k: f64 = set.entries.values().map(|f| f.elapsed).sum();
        assert!(per_k <= set.total_elapsed + 1e-9);
    }

    #[test]
    fn mul_em_records_failures() {
        let data = CountDataset::from_dense(&[vec![1, 2], vec![2, 1]]).unwrap();
        let set = mul_em(&data, 3, &quick_init(1), &EmConfig::default()).unwrap();
        assert_eq!(set.ks(), vec![1, 2]);
        assert_eq!(set.failures.len(), 1);
        assert_eq!(set.failures[0].0, 3);
    }

    #[test]
    fn int_em_top_entry_matches_plain_fit() {
        let data = small_data();
        let init = quick_init(5);
        let em = EmConfig::default();
        let set = int_em(&data, 4, &init, &em).unwrap();
        assert_eq!(set.ks(), vec![1, 2, 3, 4]);
        let start = initialize(&data, 4, &init, &em).unwrap().model;
        let plain = em_fit(&data, &start, &em).unwrap();
        let top = set.get(4).unwrap();
        assert!((top.log_likelihood - plain.log_likelihood).abs() < 1e-9);
        for k in 1..=4 {
            assert_eq!(set.get(k).unwrap().model.k(), k);
        }
    }

    #[test]
    fn int_em_and_mul_em_agree_at_k1() {
        let data = small_data();
        let em = EmConfig::default();
        let a = int_em(&data, 1, &quick_init(2), &em).unwrap();
        let b = mul_em(&data, 1, &quick_init(2), &em).unwrap();
        let (fa, fb) = (a.get(1).unwrap(), b.get(1).unwrap());
        assert!((fa.log_likelihood - fb.log_likelihood).abs() < 1e-9);
    }

    #[test]
    fn em_hac_smallest_case_and_telescoping() {
        let data = small_data();
        let em = EmConfig::default();
        let set = em_hac(&data, 2, &quick_init(3), &em).unwrap();
        assert_eq!(set.ks(), vec![1, 2]);
        assert!(em_hac(&data, 1, &quick_init(3), &em).is_err());

        let set = em_hac(&data, 5, &quick_init(3), &em).unwrap();
        assert_eq!(set.ks(), vec![1, 2, 3, 4, 5]);
        let top = &set.get(5).unwrap().model;
        let mut bary = vec![0.0; data.dim()];
        for (w, c) in top.weights().iter().zip(top.components()) {
            for (b, p) in bary.iter_mut().zip(c.as_slice()) {
                *b += w * p;
            }
        }
        let one = &set.get(1).unwrap().model;
        for (a, b) in one.components()[0].as_slice().iter().zip(&bary) {
            assert!((a - b).abs() < 1e-12);
        }
        for w in set.merges.windows(2) {
            assert!(w[1].dissimilarity >= w[0].dissimilarity);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in GenerationMethod::ALL {
            assert_eq!(m.name().parse::<GenerationMethod>().unwrap(), m);
        }
        assert!("hac".parse::<GenerationMethod>().is_err());
    }
}
