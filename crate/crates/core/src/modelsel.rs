//! Model selection over a candidate set. Every criterion is minimized.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::em::{e_step, FitResult};
use crate::error::{MmError, Result};
use crate::modelgen::CandidateModelSet;
use crate::types::argmax_lowest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Bic,
    Icl,
    Mml,
    Llh,
    LMethod,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Bic,
        Criterion::Icl,
        Criterion::Mml,
        Criterion::Llh,
        Criterion::LMethod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Bic => "bic",
            Criterion::Icl => "icl",
            Criterion::Mml => "mml",
            Criterion::Llh => "llh",
            Criterion::LMethod => "l-method",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = MmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "bic" => Ok(Criterion::Bic),
            "icl" => Ok(Criterion::Icl),
            "mml" => Ok(Criterion::Mml),
            "llh" => Ok(Criterion::Llh),
            "l-method" | "lmethod" | "lm" => Ok(Criterion::LMethod),
            other => Err(MmError::InvalidConfig(format!(
                "unknown criterion `{other}` (expected bic, icl, mml, llh, l-method)"
            ))),
        }
    }
}

/// `(K, value)` points sorted by ascending `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionCurve {
    pub criterion: Criterion,
    pub points: Vec<(usize, f64)>,
}

impl CriterionCurve {
    pub fn new(criterion: Criterion, mut points: Vec<(usize, f64)>) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(MmError::InvalidData("duplicate K in criterion curve".into()));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(MmError::InvalidData("non-finite criterion value".into()));
        }
        Ok(Self { criterion, points })
    }

    /// `K,value` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,value\n");
        for (k, v) in &self.points {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }

    /// Smallest `K` attaining the minimum among points with `K >= k_min`.
    pub fn argmin(&self, k_min: usize) -> Option<usize> {
        self.points
            .iter()
            .filter(|p| p.0 >= k_min)
            .fold(None, |best: Option<(usize, f64)>, &(k, v)| match best {
                Some((_, bv)) if bv <= v => best,
                _ => Some((k, v)),
            })
            .map(|b| b.0)
    }
}

/// Number of free parameters `KD - 1`.
pub fn free_parameters(k: usize, dim: usize) -> f64 {
    (k * dim) as f64 - 1.0
}

pub fn bic(fit: &FitResult, n: usize) -> f64 {
    bic_value(fit.log_likelihood, fit.model.k(), fit.model.dim(), n)
}

pub fn bic_value(log_likelihood: f64, k: usize, dim: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + free_parameters(k, dim) * (n as f64).ln()
}

/// `-2 Σ_i ln ρ_{i, z_i}` with `z_i` the argmax component of row `i`.
pub fn classification_penalty(fit: &FitResult) -> f64 {
    -2.0 * fit
        .responsibilities
        .rows()
        .map(|row| row[argmax_lowest(row)].ln())
        .sum::<f64>()
}

pub fn icl(fit: &FitResult, n: usize) -> f64 {
    bic(fit, n) + classification_penalty(fit)
}

pub fn mml(fit: &FitResult, n: usize) -> f64 {
    mml_value(fit.log_likelihood, fit.model.weights(), fit.model.dim(), n)
}

pub fn mml_value(log_likelihood: f64, weights: &[f64], dim: usize, n: usize) -> f64 {
    let n = n as f64;
    let nonzero: Vec<f64> = weights.iter().copied().filter(|w| *w > 0.0).collect();
    let k_nz = nonzero.len() as f64;
    let d = dim as f64;
    (d / 2.0) * nonzero.iter().map(|w| (n * w / 12.0).ln()).sum::<f64>()
        + (k_nz / 2.0) * (n / 12.0).ln()
        + k_nz * (d + 1.0) / 2.0
        - log_likelihood
}

fn value_for(criterion: Criterion, fit: &FitResult, n: usize) -> f64 {
    match criterion {
        Criterion::Bic | Criterion::LMethod => bic(fit, n),
        Criterion::Icl => icl(fit, n),
        Criterion::Mml => mml(fit, n),
        Criterion::Llh => -fit.log_likelihood,
    }
}

/// `(K, -L)` for every entry.
pub fn llh_curve(candidates: &CandidateModelSet) -> Result<CriterionCurve> {
    CriterionCurve::new(
        Criterion::Llh,
        candidates
            .entries
            .iter()
            .map(|(&k, f)| (k, -f.log_likelihood))
            .collect(),
    )
}

/// Criterion values over every candidate. The L-method curve holds BIC values.
pub fn criterion_curve(
    candidates: &CandidateModelSet,
    criterion: Criterion,
    n: usize,
) -> Result<CriterionCurve> {
    CriterionCurve::new(
        criterion,
        candidates
            .entries
            .iter()
            .map(|(&k, f)| (k, value_for(criterion, f, n)))
            .collect(),
    )
}

/// Least-squares line through `points`; returns the root mean squared residual.
fn line_rmse(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (my + slope * (p.0 - mx));
            r * r
        })
        .sum();
    (sse / n).sqrt()
}

/// Total segment-size-weighted RMSE of the two-line fit split at each knee
/// candidate. Both segments contain the knee point itself.
pub fn l_method_errors(curve: &CriterionCurve) -> Result<Vec<(usize, f64)>> {
    let pts = &curve.points;
    if pts.len() < 4 {
        return Err(MmError::CurveTooShort { got: pts.len() });
    }
    let xy: Vec<(f64, f64)> = pts.iter().map(|&(k, v)| (k as f64, v)).collect();
    let mut out = Vec::with_capacity(pts.len() - 2);
    for c in 1..pts.len() - 1 {
        let left = &xy[..=c];
        let right = &xy[c..];
        let (nl, nr) = (left.len() as f64, right.len() as f64);
        let total = (nl * line_rmse(left) + nr * line_rmse(right)) / (nl + nr);
        out.push((pts[c].0, total));
    }
    Ok(out)
}

/// Knee of the curve: the interior point minimizing the two-line error,
/// smallest `K` on ties.
pub fn l_method(curve: &CriterionCurve) -> Result<usize> {
    l_method_from(curve, 0)
}

fn l_method_from(curve: &CriterionCurve, k_min: usize) -> Result<usize> {
    let errors = l_method_errors(curve)?;
    errors
        .iter()
        .filter(|e| e.0 >= k_min)
        .fold(None, |best: Option<(usize, f64)>, &(k, e)| match best {
            Some((_, be)) if be <= e => best,
            _ => Some((k, e)),
        })
        .map(|b| b.0)
        .ok_or_else(|| {
            MmError::InvalidConfig(format!("no L-method knee candidate with K >= {k_min}"))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k: usize,
    pub criterion: Criterion,
    pub curve: CriterionCurve,
}

/// Selects `K_o` among the candidates with `K >= k_min`.
///
/// With a single candidate that candidate is returned for every criterion.
pub fn select_model<'a>(
    candidates: &'a CandidateModelSet,
    criterion: Criterion,
    k_min: usize,
    n: usize,
) -> Result<(Selection, &'a FitResult)> {
    if candidates.entries.is_empty() {
        return Err(MmError::InvalidData("no candidate models".into()));
    }
    let curve = criterion_curve(candidates, criterion, n)?;
    let k = if candidates.entries.len() == 1 {
        *candidates.entries.keys().next().unwrap()
    } else if criterion == Criterion::LMethod {
        l_method_from(&curve, k_min)?
    } else {
        curve
            .argmin(k_min)
            .ok_or_else(|| MmError::InvalidConfig(format!("no candidate with K >= {k_min}")))?
    };
    let fit = &candidates.entries[&k];
    Ok((Selection { k, criterion, curve }, fit))
}

/// Recomputes responsibilities when a fit lacks them for the stored model.
pub fn ensure_responsibilities(
    fit: &mut FitResult,
    data: &crate::types::CountDataset,
) -> Result<()> {
    if fit.responsibilities.n() != data.n() || fit.responsibilities.k() != fit.model.k() {
        fit.responsibilities = e_step(data, &fit.model)?;
    }
    Ok(())
}
