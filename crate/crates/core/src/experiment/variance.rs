//! Bootstrap variance study: how stable are the fairness metrics of two
//! trained models under resampled test sets?

use crate::data::SubgroupIndex;
use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::runner::{prepare_clients, run_setup};
use crate::fed::concat_datasets;
use crate::metrics::{demographic_parity, dfpr, dppv, MetricConfig};
use crate::model::ModelParams;
use crate::rng::{derive_rng, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VarianceEntry {
    pub baseline: f64,
    pub fedida: f64,
    pub reduction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceReport {
    pub replicates: usize,
    pub stratified: bool,
    pub per_metric: BTreeMap<String, VarianceEntry>,
    /// Raw per-replicate values keyed by metric, for plotting.
    pub samples: BTreeMap<String, Vec<(f64, f64)>>,
}

/// Empirical variance with the 1/T convention.
fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

struct Replicate {
    scores_base: Vec<f64>,
    scores_fedida: Vec<f64>,
    y: Vec<u8>,
    groups: Vec<u32>,
}

/// Draw one bootstrap test set as row indices into the pooled test split.
/// Stratified mode resamples within each subgroup - by default preserving
/// every subgroup's own size, or drawing a fixed balanced quota when
/// `per_group` is set; plain mode resamples rows uniformly.
fn draw_rows(
    index: &SubgroupIndex,
    stratified: bool,
    per_group: Option<usize>,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> Vec<usize> {
    let n = index.total();
    if stratified {
        let mut rows = Vec::with_capacity(n);
        for g in 0..index.k() {
            let members = index.members(g);
            let quota = per_group.unwrap_or(members.len());
            for _ in 0..quota {
                rows.push(members[rng.random_range(0..members.len())]);
            }
        }
        rows
    } else {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    }
}

/// Train the two configured setups and compare fairness-metric variance
/// over `t_b` bootstrap test sets (both models see the same replicates).
pub fn cmd_variance_study(cfg: &ExperimentConfig, t_b: usize) -> Result<VarianceReport> {
    if t_b < 10 {
        return Err(Error::config(format!(
            "variance study needs at least 10 replicates, got {t_b}"
        )));
    }
    let spec = cfg
        .variance_study
        .as_ref()
        .ok_or_else(|| Error::config("config lacks a variance_study section"))?;
    let clients = prepare_clients(cfg)?;
    let setups = cfg.effective_setups();
    let find = |name: &str| {
        setups
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::config(format!("unknown setup '{name}'")))
    };
    let base_run = run_setup(cfg, &clients, find(&spec.baseline_setup)?)?;
    let fedida_run = run_setup(cfg, &clients, find(&spec.fedida_setup)?)?;

    let pooled = concat_datasets(clients.iter().map(|c| &c.test))?;
    let index = SubgroupIndex::build(&pooled, false)?;
    let mut metric_cfg = cfg.evaluation.metric_config();
    metric_cfg.mode = spec.metric_mode;

    compare_models(
        &base_run.outcome.global,
        &fedida_run.outcome.global,
        &pooled,
        &index,
        &metric_cfg,
        t_b,
        spec.stratified,
        spec.per_group,
        cfg.seed,
    )
}

/// The bootstrap comparison itself, reusable with pre-trained parameters.
#[allow(clippy::too_many_arguments)]
pub fn compare_models(
    baseline: &ModelParams,
    fedida: &ModelParams,
    pooled: &crate::data::TabularDataset,
    index: &SubgroupIndex,
    metric_cfg: &MetricConfig,
    t_b: usize,
    stratified: bool,
    per_group: Option<usize>,
    seed: u64,
) -> Result<VarianceReport> {
    let scores_base = baseline.forward(&pooled.a)?.probs;
    let scores_fedida = fedida.forward(&pooled.a)?.probs;

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for t in 0..t_b {
        let mut rng = derive_rng(seed, &[tag("bootstrap"), t as u64]);
        let rows = draw_rows(index, stratified, per_group, &mut rng);
        let rep = Replicate {
            scores_base: rows.iter().map(|&i| scores_base[i]).collect(),
            scores_fedida: rows.iter().map(|&i| scores_fedida[i]).collect(),
            y: rows.iter().map(|&i| pooled.y[i]).collect(),
            groups: rows.iter().map(|&i| index.group_of_row(i) as u32).collect(),
        };
        let rep_index = SubgroupIndex::from_rows(
            rep.groups.iter().map(std::slice::from_ref),
            &rep.y,
            false,
        )?;
        for (name, base_v, fed_v) in [
            metric_pair("dpd", &rep, &rep_index, metric_cfg, MetricSel::Dpd)?,
            metric_pair("dpr", &rep, &rep_index, metric_cfg, MetricSel::Dpr)?,
            metric_pair("dfpr", &rep, &rep_index, metric_cfg, MetricSel::Dfpr)?,
            metric_pair("dppv", &rep, &rep_index, metric_cfg, MetricSel::Dppv)?,
        ] {
            series.entry(name.to_string()).or_default().push((base_v, fed_v));
        }
    }

    let per_metric = series
        .iter()
        .map(|(name, pairs)| {
            let base: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let fed: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let vb = variance(&base);
            let vf = variance(&fed);
            (name.clone(), VarianceEntry { baseline: vb, fedida: vf, reduction: vb - vf })
        })
        .collect();

    Ok(VarianceReport { replicates: t_b, stratified, per_metric, samples: series })
}

enum MetricSel {
    Dpd,
    Dpr,
    Dfpr,
    Dppv,
}

fn metric_pair(
    name: &'static str,
    rep: &Replicate,
    index: &SubgroupIndex,
    cfg: &MetricConfig,
    sel: MetricSel,
) -> Result<(&'static str, f64, f64)> {
    let eval = |scores: &[f64]| -> Result<f64> {
        Ok(match sel {
            MetricSel::Dpd => demographic_parity(scores, index, cfg)?.0,
            MetricSel::Dpr => demographic_parity(scores, index, cfg)?.1,
            MetricSel::Dfpr => dfpr(scores, &rep.y, index, cfg)?.0,
            MetricSel::Dppv => dppv(scores, &rep.y, index, cfg)?.0,
        })
    };
    Ok((name, eval(&rep.scores_base)?, eval(&rep.scores_fedida)?))
}
