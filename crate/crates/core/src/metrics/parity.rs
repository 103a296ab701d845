//! Group disparity metrics: demographic parity difference/ratio, false
//! positive rate gap, and positive predictive value gap.
//!
//! Every metric exists in two modes. Hard mode thresholds scores into
//! decisions as in the headline experiment tables; soft mode works on group
//! means of the scores themselves, which is the form the perturbation
//! bounds apply to.

use crate::data::subgroup::SubgroupIndex;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    #[default]
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricConfig {
    pub threshold: f64,
    pub min_group_size: usize,
    pub mode: MetricMode,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { threshold: 0.5, min_group_size: 5, mode: MetricMode::Hard }
    }
}

/// Per-group positive rates. Hard: share of scores over the threshold;
/// soft: mean score. Groups under `min_group_size` are ineligible.
pub fn group_positive_rates(
    scores: &[f64],
    index: &SubgroupIndex,
    cfg: &MetricConfig,
) -> Vec<Option<f64>> {
    (0..index.k())
        .map(|g| {
            let members = index.members(g);
            if members.len() < cfg.min_group_size {
                return None;
            }
            let total: f64 = members
                .iter()
                .map(|&i| match cfg.mode {
                    MetricMode::Hard => f64::from(scores[i] >= cfg.threshold),
                    MetricMode::Soft => scores[i],
                })
                .sum();
            Some(total / members.len() as f64)
        })
        .collect()
}

/// Per-group false positive rates over the Y=0 stratum. Eligibility needs
/// at least `min_group_size` negatives in the group.
pub fn group_fprs(
    scores: &[f64],
    y: &[u8],
    index: &SubgroupIndex,
    cfg: &MetricConfig,
) -> Vec<Option<f64>> {
    (0..index.k())
        .map(|g| {
            let negs: Vec<usize> =
                index.members(g).iter().copied().filter(|&i| y[i] == 0).collect();
            if negs.len() < cfg.min_group_size {
                return None;
            }
            let total: f64 = negs
                .iter()
                .map(|&i| match cfg.mode {
                    MetricMode::Hard => f64::from(scores[i] >= cfg.threshold),
                    MetricMode::Soft => scores[i],
                })
                .sum();
            Some(total / negs.len() as f64)
        })
        .collect()
}

/// Per-group precision. Hard: share of true labels among predicted
/// positives, needing `min_group_size` predicted positives. Soft: group
/// mean of score*label, a plain bounded mean over the fixed group (the
/// form the Lipschitz probe assumes).
pub fn group_ppvs(
    scores: &[f64],
    y: &[u8],
    index: &SubgroupIndex,
    cfg: &MetricConfig,
) -> Vec<Option<f64>> {
    (0..index.k())
        .map(|g| {
            let members = index.members(g);
            match cfg.mode {
                MetricMode::Hard => {
                    let preds: Vec<usize> = members
                        .iter()
                        .copied()
                        .filter(|&i| scores[i] >= cfg.threshold)
                        .collect();
                    if preds.len() < cfg.min_group_size {
                        return None;
                    }
                    let hits: f64 = preds.iter().map(|&i| f64::from(y[i])).sum();
                    Some(hits / preds.len() as f64)
                }
                MetricMode::Soft => {
                    if members.len() < cfg.min_group_size {
                        return None;
                    }
                    let total: f64 =
                        members.iter().map(|&i| scores[i] * f64::from(y[i])).sum();
                    Some(total / members.len() as f64)
                }
            }
        })
        .collect()
}

fn eligible(values: &[Option<f64>]) -> Vec<f64> {
    values.iter().flatten().copied().collect()
}

fn max_abs_gap(values: &[Option<f64>], what: &str) -> Result<f64> {
    let v = eligible(values);
    if v.len() < 2 {
        return Err(Error::metric(format!(
            "{what} needs at least 2 eligible groups, found {}",
            v.len()
        )));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// (DPD, DPR, per-group rates). DPD is the largest pairwise rate gap, DPR
/// the min/max rate ratio. A zero max rate has no defined ratio.
pub fn demographic_parity(
    scores: &[f64],
    index: &SubgroupIndex,
    cfg: &MetricConfig,
) -> Result<(f64, f64, Vec<Option<f64>>)> {
    let rates = group_positive_rates(scores, index, cfg);
    let dpd = max_abs_gap(&rates, "demographic parity")?;
    let v = eligible(&rates);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        return Err(Error::metric(
            "demographic parity ratio undefined: no group has a positive rate",
        ));
    }
    Ok((dpd, min / max, rates))
}

pub fn dfpr(
    scores: &[f64],
    y: &[u8],
    index: &SubgroupIndex,
    cfg: &MetricConfig,
) -> Result<(f64, Vec<Option<f64>>)> {
    let fprs = group_fprs(scores, y, index, cfg);
    let gap = max_abs_gap(&fprs, "false positive rate gap")?;
    Ok((gap, fprs))
}

pub fn dppv(
    scores: &[f64],
    y: &[u8],
    index: &SubgroupIndex,
    cfg: &MetricConfig,
) -> Result<(f64, Vec<Option<f64>>)> {
    let ppvs = group_ppvs(scores, y, index, cfg);
    let gap = max_abs_gap(&ppvs, "positive predictive value gap")?;
    Ok((gap, ppvs))
}

/// Full evaluation of one score vector against one subgroup index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessReport {
    pub auroc: f64,
    pub dpd: f64,
    pub dpr: f64,
    pub dfpr: f64,
    pub dppv: f64,
    pub per_group_positive_rate: BTreeMap<String, f64>,
    pub per_group_fpr: BTreeMap<String, f64>,
    pub per_group_ppv: BTreeMap<String, f64>,
    pub threshold: f64,
    pub mode: MetricMode,
    pub skipped_groups: Vec<String>,
}

pub fn evaluate(
    scores: &[f64],
    y: &[u8],
    index: &SubgroupIndex,
    cfg: &MetricConfig,
) -> Result<FairnessReport> {
    let auroc = super::auroc::auroc(scores, y)?;
    let (dpd_v, dpr_v, rates) = demographic_parity(scores, index, cfg)?;
    let (dfpr_v, fprs) = dfpr(scores, y, index, cfg)?;
    let (dppv_v, ppvs) = dppv(scores, y, index, cfg)?;

    let named = |values: &[Option<f64>]| -> BTreeMap<String, f64> {
        index
            .keys()
            .iter()
            .zip(values)
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    };
    let mut skipped: Vec<String> = index
        .keys()
        .iter()
        .zip(&rates)
        .zip(&fprs)
        .zip(&ppvs)
        .filter(|(((_, r), f), p)| r.is_none() || f.is_none() || p.is_none())
        .map(|(((k, _), _), _)| k.to_string())
        .collect();
    skipped.dedup();

    Ok(FairnessReport {
        auroc,
        dpd: dpd_v,
        dpr: dpr_v,
        dfpr: dfpr_v,
        dppv: dppv_v,
        per_group_positive_rate: named(&rates),
        per_group_fpr: named(&fprs),
        per_group_ppv: named(&ppvs),
        threshold: cfg.threshold,
        mode: cfg.mode,
        skipped_groups: skipped,
    })
}
