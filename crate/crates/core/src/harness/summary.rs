use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::run::TrialOutcome;

/// Order statistics under the lower-nearest-rank convention: the
/// `q`-quantile of `N` sorted values is the one at 1-based rank
/// `max(1, ⌈qN⌉)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

impl Quantiles {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Err(Error::EmptyInput);
        }
        v.sort_by(f64::total_cmp);
        Ok(Self {
            min: v[0],
            p25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            p75: quantile_sorted(&v, 0.75),
            p95: quantile_sorted(&v, 0.95),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub l2_err: Quantiles,
    pub linf_err: Quantiles,
    pub normalized_linf: Quantiles,
    pub cost_ratio: Quantiles,
    /// Fraction of trials failing the ℓ∞ guarantee check.
    pub exceedance_rate: f64,
    /// Fraction of trials failing the ℓ₂ guarantee check.
    pub l2_exceedance_rate: f64,
    /// Fraction of trials with a detected Count-Sketch witness; present for
    /// the Count-Sketch counterexample only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event_rate: Option<f64>,
    pub trials_run: usize,
}

pub fn summarize(rows: &[TrialOutcome]) -> Result<TrialSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = rows.len() as f64;
    let frac = |count: usize| count as f64 / n;
    let detected: Vec<bool> = rows
        .iter()
        .filter_map(|r| r.events.as_ref())
        .map(|e| e.witness_column.is_some())
        .collect();
    Ok(TrialSummary {
        l2_err: Quantiles::of(rows.iter().map(|r| r.row.l2_err))?,
        linf_err: Quantiles::of(rows.iter().map(|r| r.row.linf_err))?,
        normalized_linf: Quantiles::of(rows.iter().map(|r| r.row.normalized_linf))?,
        cost_ratio: Quantiles::of(rows.iter().map(|r| r.row.cost_ratio))?,
        exceedance_rate: frac(rows.iter().filter(|r| !r.check.linf_pass).count()),
        l2_exceedance_rate: frac(rows.iter().filter(|r| !r.check.l2_pass).count()),
        event_rate: if detected.len() == rows.len() {
            Some(frac(detected.iter().filter(|&&x| x).count()))
        } else {
            None
        },
        trials_run: rows.len(),
    })
}
