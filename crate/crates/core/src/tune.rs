//! Hyperparameter selection: the per-client penalty-strength search with
//! its cross-client combination rule, and the two-stage grid optimization
//! of the L2 weight.

use crate::error::{Error, Result};
use crate::fed::{local_train, run_federation, ClientData, FederationConfig};
use crate::metrics::{demographic_parity, MetricConfig};
use crate::model::ModelParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn default_degradation() -> f64 {
    0.995
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaSearchConfig {
    /// Strictly increasing candidate penalties; must start at 0.
    pub grid: Vec<f64>,
    /// Accuracy floor relative to the unpenalized baseline.
    #[serde(default = "default_degradation")]
    pub degradation_factor: f64,
    /// Candidates handed back after combining across clients.
    pub user_count: usize,
    /// Training budget per candidate, in local epochs.
    #[serde(default = "default_lambda_epochs")]
    pub epochs_per_candidate: usize,
}

fn default_lambda_epochs() -> usize {
    1
}

impl LambdaSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid[0] != 0.0 {
            return Err(Error::config("lambda grid must start at 0"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("lambda grid must be strictly increasing"));
        }
        if !(self.degradation_factor > 0.0 && self.degradation_factor <= 1.0) {
            return Err(Error::config("degradation factor must lie in (0, 1]"));
        }
        if self.user_count == 0 {
            return Err(Error::config("user_count must be >= 1"));
        }
        Ok(())
    }
}

fn accuracy(params: &ModelParams, ds: &crate::data::TabularDataset, threshold: f64) -> Result<f64> {
    let scores = params.forward(&ds.a)?;
    let hits = scores
        .probs
        .iter()
        .zip(&ds.y)
        .filter(|(&p, &y)| u8::from(p >= threshold) == y)
        .count();
    Ok(hits as f64 / ds.y.len().max(1) as f64)
}

/// One client's local penalty-strength scan. Walks the grid upward,
/// training a short model per candidate, and returns the largest value
/// whose validation accuracy stays above `degradation_factor * Acc0`.
pub fn search_lambda_local(
    client: &ClientData,
    base: &FederationConfig,
    cfg: &LambdaSearchConfig,
    client_id: usize,
) -> Result<f64> {
    cfg.validate()?;
    let mut train_cfg = base.clone();
    train_cfg.local_epochs = vec![cfg.epochs_per_candidate];
    train_cfg.rose = None;
    train_cfg.penalty.gamma = 0.0;
    let init = ModelParams::init(base.model, client.train.p_a(), base.hidden_units, base.seed);

    let mut acc0 = None;
    let mut best = 0.0;
    for (step, &lambda) in cfg.grid.iter().enumerate() {
        train_cfg.penalty.lambda = lambda;
        let (params, _) = local_train(&init, &client.train, &train_cfg, client_id, step)?;
        let acc = accuracy(&params, &client.val, 0.5)?;
        match acc0 {
            None => {
                acc0 = Some(acc);
                best = lambda;
            }
            Some(base_acc) => {
                if acc >= cfg.degradation_factor * base_acc {
                    best = lambda;
                } else {
                    break;
                }
            }
        }
    }
    Ok(best)
}

/// Cross-client combination: the binding budget is the smallest per-client
/// tolerance, stretched into `user_count` equally spaced candidates over
/// (0, min].
pub fn combine_lambda(per_client: &[f64], user_count: usize) -> Result<Vec<f64>> {
    if per_client.is_empty() {
        return Err(Error::config("no per-client lambda values"));
    }
    if user_count == 0 {
        return Err(Error::config("user_count must be >= 1"));
    }
    let max = per_client.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        return Ok(vec![0.0]);
    }
    Ok((1..=user_count).map(|i| max * i as f64 / user_count as f64).collect())
}

/// One gamma candidate's validation outcome.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaCandidate {
    pub gamma: f64,
    pub auroc: f64,
    pub dpd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaSearchResult {
    pub coarse_grid: Vec<f64>,
    pub coarse_best: f64,
    pub coarse_candidates: Vec<GammaCandidate>,
    pub refined_grid: Vec<f64>,
    pub refined_candidates: Vec<GammaCandidate>,
    pub r#final: f64,
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn evaluate_candidate(
    gamma: f64,
    clients: &[ClientData],
    base: &FederationConfig,
    metric_cfg: &MetricConfig,
) -> Result<GammaCandidate> {
    let mut cfg = base.clone();
    cfg.penalty.gamma = gamma;
    let outcome = run_federation(clients, &cfg)?;
    let mut aurocs = Vec::new();
    let mut dpds = Vec::new();
    for (c, data) in clients.iter().enumerate() {
        let params = outcome.eval_params(c);
        let scores = params.forward(&data.val.a)?;
        aurocs.push(crate::metrics::auroc(&scores.probs, &data.val.y)?);
        let index = crate::data::SubgroupIndex::build(&data.val, false)?;
        let (dpd, ..) = demographic_parity(&scores.probs, &index, metric_cfg)?;
        dpds.push(dpd);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(GammaCandidate { gamma, auroc: mean(&aurocs), dpd: mean(&dpds) })
}

/// Full federated run per candidate (shared seed), scored on the clients'
/// validation splits. Selection: keep candidates within 0.995x of the best
/// validation AUROC, then minimize DPD, ties to the smaller gamma.
pub fn optimize_gamma(
    grid: &[f64],
    clients: &[ClientData],
    base: &FederationConfig,
    metric_cfg: &MetricConfig,
) -> Result<(f64, Vec<GammaCandidate>)> {
    if grid.is_empty() {
        return Err(Error::config("gamma grid is empty"));
    }
    let results: Vec<Result<GammaCandidate>> = grid
        .par_iter()
        .map(|&g| evaluate_candidate(g, clients, base, metric_cfg))
        .collect();
    let candidates: Vec<GammaCandidate> = results.into_iter().collect::<Result<Vec<_>>>()?;
    let best_auroc = candidates.iter().map(|c| c.auroc).fold(f64::NEG_INFINITY, f64::max);
    let winner = candidates
        .iter()
        .filter(|c| c.auroc >= 0.995 * best_auroc)
        .min_by(|a, b| {
            a.dpd
                .partial_cmp(&b.dpd)
                .unwrap()
                .then(a.gamma.partial_cmp(&b.gamma).unwrap())
        })
        .expect("at least the best-AUROC candidate is eligible");
    Ok((winner.gamma, candidates))
}

/// Two-stage gamma selection followed by the final training run.
///
/// Coarse: `m` equally spaced values over `gamma_range`. Refined: `m_prime`
/// values spanning the coarse winner's neighbor interval (clamped at the
/// range edges), with the winner itself kept in the grid.
pub fn fedida_full(
    clients: &[ClientData],
    base: &FederationConfig,
    lambda: f64,
    gamma_range: (f64, f64),
    m: usize,
    m_prime: usize,
    metric_cfg: &MetricConfig,
) -> Result<(GammaSearchResult, crate::fed::FederationOutcome)> {
    if m < 2 || m_prime < 2 {
        return Err(Error::config("both grid sizes must be >= 2"));
    }
    if !(gamma_range.0 >= 0.0 && gamma_range.1 > gamma_range.0) {
        return Err(Error::config("gamma range must satisfy 0 <= lo < hi"));
    }
    let mut cfg = base.clone();
    cfg.penalty.lambda = lambda;

    let coarse_grid = linspace(gamma_range.0, gamma_range.1, m);
    let (coarse_best, coarse_candidates) =
        optimize_gamma(&coarse_grid, clients, &cfg, metric_cfg)?;
    let s = coarse_grid
        .iter()
        .position(|&g| g == coarse_best)
        .expect("winner comes from the grid");
    let lo = coarse_grid[s.saturating_sub(1)];
    let hi = coarse_grid[(s + 1).min(m - 1)];

    let mut refined_grid = linspace(lo, hi, m_prime);
    if !refined_grid.iter().any(|&g| (g - coarse_best).abs() < 1e-15) {
        // keep the coarse winner available in the refined stage
        let nearest = refined_grid
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - coarse_best).abs().partial_cmp(&(b.1 - coarse_best).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        refined_grid[nearest] = coarse_best;
        refined_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let (final_gamma, refined_candidates) =
        optimize_gamma(&refined_grid, clients, &cfg, metric_cfg)?;

    cfg.penalty.gamma = final_gamma;
    let outcome = run_federation(clients, &cfg)?;
    Ok((
        GammaSearchResult {
            coarse_grid,
            coarse_best,
            coarse_candidates,
            refined_grid,
            refined_candidates,
            r#final: final_gamma,
        },
        outcome,
    ))
}
