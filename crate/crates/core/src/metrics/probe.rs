//! Single-row perturbation probes.
//!
//! Replaces one row's (score, label) and reports the metric before and
//! after together with the sensitivity bound the change must respect:
//! 1/|affected subgroup| for the mean-based metrics, and
//! (1/delta^2) * 1/|group| for the ratio metric, where delta is the
//! smallest group rate observed in either state. Soft mode only; hard
//! thresholding is not Lipschitz in the scores.

use crate::data::subgroup::SubgroupIndex;
use crate::error::{Error, Result};
use crate::metrics::parity::{
    demographic_parity, dfpr, dppv, group_positive_rates, MetricConfig, MetricMode,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMetric {
    Dpd,
    Dpr,
    Dfpr,
    Dppv,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeOutcome {
    pub before: f64,
    pub after: f64,
    pub bound: f64,
}

/// Replace `row`'s score (and label, where the metric permits) and
/// recompute. The row's subgroup must not change; for the FPR gap the
/// label is part of the effective partition, so label changes there are
/// rejected.
pub fn perturbation_probe(
    metric: ProbeMetric,
    scores: &[f64],
    y: &[u8],
    index: &SubgroupIndex,
    row: usize,
    replacement: (f64, u8),
    min_group_size: usize,
) -> Result<ProbeOutcome> {
    if row >= scores.len() {
        return Err(Error::metric(format!("probe row {row} out of range")));
    }
    let (new_score, new_y) = replacement;
    if !(0.0..=1.0).contains(&new_score) || scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::metric("probe requires scores in [0, 1]"));
    }
    if index.by_outcome() && new_y != y[row] {
        return Err(Error::metric(
            "replacement changes the row's outcome and therefore its subgroup",
        ));
    }
    if metric == ProbeMetric::Dfpr && new_y != y[row] {
        return Err(Error::metric(
            "FPR probe cannot change the label: the Y=0 stratum is part of the partition",
        ));
    }

    let cfg = MetricConfig { threshold: 0.5, min_group_size, mode: MetricMode::Soft };
    let mut scores2 = scores.to_vec();
    scores2[row] = new_score;
    let mut y2 = y.to_vec();
    y2[row] = new_y;

    let g = index.group_of_row(row);
    let group_size = index.size(g);

    let (before, after, bound) = match metric {
        ProbeMetric::Dpd => {
            let (b, ..) = demographic_parity(scores, index, &cfg)?;
            let (a, ..) = demographic_parity(&scores2, index, &cfg)?;
            (b, a, 1.0 / group_size as f64)
        }
        ProbeMetric::Dpr => {
            let (_, b, rates_b) = demographic_parity(scores, index, &cfg)?;
            let (_, a, rates_a) = demographic_parity(&scores2, index, &cfg)?;
            let delta = rates_b
                .iter()
                .chain(&rates_a)
                .flatten()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if delta <= 0.0 {
                return Err(Error::metric(
                    "ratio probe needs all group rates bounded away from zero",
                ));
            }
            (b, a, (1.0 / (delta * delta)) * (1.0 / group_size as f64))
        }
        ProbeMetric::Dfpr => {
            let (b, _) = dfpr(scores, y, index, &cfg)?;
            let (a, _) = dfpr(&scores2, &y2, index, &cfg)?;
            let negs = index.members(g).iter().filter(|&&i| y[i] == 0).count();
            if negs == 0 {
                // the probed row's group carries no negatives; the metric
                // cannot move
                (b, a, 0.0)
            } else {
                (b, a, 1.0 / negs as f64)
            }
        }
        ProbeMetric::Dppv => {
            let (b, _) = dppv(scores, y, index, &cfg)?;
            let (a, _) = dppv(&scores2, &y2, index, &cfg)?;
            (b, a, 1.0 / group_size as f64)
        }
    };
    Ok(ProbeOutcome { before, after, bound })
}

/// Convenience for the ratio bound: smallest eligible soft rate.
pub fn min_group_rate(
    scores: &[f64],
    index: &SubgroupIndex,
    min_group_size: usize,
) -> Option<f64> {
    let cfg = MetricConfig { threshold: 0.5, min_group_size, mode: MetricMode::Soft };
    group_positive_rates(scores, index, &cfg)
        .iter()
        .flatten()
        .copied()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
}
