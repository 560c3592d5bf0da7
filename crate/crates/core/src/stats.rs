//! Weighted summary statistics over per-pair stretch values.

use serde::{Deserialize, Serialize};

/// How site pairs are weighted when summarizing stretch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Gravity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchStats {
    pub median: f64,
    pub mean: f64,
    pub p95: f64,
    pub weighting: Weighting,
}

impl StretchStats {
    /// Summarizes `(value, weight)` samples. Returns `None` for an empty or
    /// zero-weight sample.
    pub fn from_weighted(samples: &[(f64, f64)], weighting: Weighting) -> Option<Self> {
        let summary = WeightedSample::new(samples)?;
        Some(Self {
            median: summary.quantile(0.5),
            mean: summary.mean(),
            p95: summary.quantile(0.95),
            weighting,
        })
    }
}

/// A sorted weighted sample.
///
/// Quantiles use the lower definition: the smallest value whose cumulative
/// weight reaches `q` of the total. When all weights are equal the sample is
/// treated as unweighted, so equal weights reproduce uniform statistics bit
/// for bit.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
    mean: f64,
}

impl WeightedSample {
    pub fn new(samples: &[(f64, f64)]) -> Option<Self> {
        let uniform = samples.windows(2).all(|w| w[0].1 == w[1].1);
        let mut sorted: Vec<(f64, f64)> = samples
            .iter()
            .map(|&(v, w)| (v, if uniform { 1.0 } else { w }))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if sorted.is_empty() {
            return None;
        }
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let mut weighted_sum = 0.0;
        let mut cumulative = Vec::with_capacity(sorted.len());
        for &(v, w) in &sorted {
            acc += w;
            weighted_sum += v * w;
            cumulative.push(acc);
        }
        Some(Self {
            values: sorted.iter().map(|s| s.0).collect(),
            cumulative,
            total: acc,
            mean: weighted_sum / acc,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let target = q.clamp(0.0, 1.0) * self.total * (1.0 - 1e-12);
        let idx = self.cumulative.partition_point(|&c| c < target);
        self.values[idx.min(self.values.len() - 1)]
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Unweighted lower quantile of a sample; `None` when empty.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let s: Vec<(f64, f64)> = values.iter().map(|&v| (v, 1.0)).collect();
    WeightedSample::new(&s).map(|w| w.quantile(q))
}
