//! Simulated federated training.
//!
//! Clients are in-memory actors that only ever read their own dataset.
//! Parameters cross the client/server boundary as serialized JSON both
//! ways, so the data-isolation structure of a real deployment is kept
//! even though everything runs in one process. Within a round, clients
//! train independently (optionally in parallel); aggregation is the only
//! synchronization point, and every random decision draws from a stream
//! keyed by (seed, client, round), so results do not depend on execution
//! order or thread count.

use crate::data::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::matrix::{CategoryMatrix, Matrix};
use crate::model::{ModelKind, ModelParams};
use crate::penalty::{composite_objective, PenaltyConfig};
use crate::rng::{derive_rng, tag};
use crate::rose::{fairness_aware_rose_with, RoseConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Central,
    Local,
    FedAvg,
    PFedAvg,
}

fn default_hidden() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FederationConfig {
    pub strategy: Strategy,
    pub clients: usize,
    pub rounds: usize,
    /// One entry per client; a single entry is broadcast to all clients.
    pub local_epochs: Vec<usize>,
    pub batch_size: usize,
    pub lr: f64,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub rose: Option<RoseConfig>,
    #[serde(default)]
    pub personalization_steps: usize,
    pub model: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default)]
    pub seed: u64,
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("federation needs at least one client"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.local_epochs.is_empty() {
            return Err(Error::config("local_epochs must not be empty"));
        }
        if self.local_epochs.len() != 1 && self.local_epochs.len() != self.clients {
            return Err(Error::config(format!(
                "local_epochs lists {} entries for {} clients",
                self.local_epochs.len(),
                self.clients
            )));
        }
        self.penalty.validate()?;
        if let Some(rose) = &self.rose {
            rose.validate()?;
        }
        Ok(())
    }

    pub fn epochs_for(&self, client: usize) -> usize {
        if self.local_epochs.len() == 1 {
            self.local_epochs[0]
        } else {
            self.local_epochs[client]
        }
    }
}

/// One client's private splits. The engine hands a client only its own
/// `ClientData`; nothing else can reach another client's rows.
#[derive(Debug, Clone)]
pub struct ClientData {
    pub train: TabularDataset,
    pub val: TabularDataset,
    pub test: TabularDataset,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClientTrace {
    pub client: usize,
    pub mean_loss: f64,
    pub mean_penalty: f64,
    pub samples: usize,
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTrace {
    pub round: usize,
    pub clients: Vec<ClientTrace>,
    pub total_samples: usize,
    /// FNV-1a hash of the aggregated parameter JSON.
    pub params_checksum: String,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub global: ModelParams,
    /// Per-client models where the strategy produces them (local, pfedavg).
    pub personalized: Option<Vec<ModelParams>>,
    pub traces: Vec<RoundTrace>,
}

impl FederationOutcome {
    /// The parameters used to score a given client at evaluation time.
    pub fn eval_params(&self, client: usize) -> &ModelParams {
        match &self.personalized {
            Some(models) => &models[client],
            None => &self.global,
        }
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sample-weighted elementwise mean of client parameters.
pub fn aggregate(params: &[ModelParams], weights: &[f64]) -> Result<ModelParams> {
    if params.is_empty() {
        return Err(Error::model("nothing to aggregate"));
    }
    if params.len() != weights.len() {
        return Err(Error::model("weight count does not match params count"));
    }
    if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(Error::model("aggregation weights must be positive"));
    }
    let first_kind = params[0].kind();
    let first_p = params[0].p_a();
    for p in params.iter().skip(1) {
        if p.kind() != first_kind || p.p_a() != first_p {
            return Err(Error::model("parameter shapes differ across clients"));
        }
    }
    let total: f64 = weights.iter().sum();
    let mut out = params[0].zeros_like();
    for (p, &w) in params.iter().zip(weights) {
        out.axpy(w / total, p);
    }
    Ok(out)
}

struct BatchView {
    a: Matrix,
    s: CategoryMatrix,
    y: Vec<u8>,
}

fn gather_batch(ds: &TabularDataset, idx: &[usize]) -> BatchView {
    BatchView {
        a: ds.a.select_rows(idx),
        s: ds.s.select_rows(idx),
        y: idx.iter().map(|&i| ds.y[i]).collect(),
    }
}

fn sensitive_ids(s: &CategoryMatrix) -> Vec<u32> {
    let mut map: std::collections::BTreeMap<Vec<u32>, u32> = std::collections::BTreeMap::new();
    let mut ids = Vec::with_capacity(s.rows());
    for i in 0..s.rows() {
        let next = map.len() as u32;
        ids.push(*map.entry(s.row(i).to_vec()).or_insert(next));
    }
    ids
}

/// One SGD step's batch assembly: optional oversampling, then group ids.
fn prepare_batch(
    batch: BatchView,
    cfg: &FederationConfig,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> Result<(Matrix, Vec<u8>, Vec<u32>)> {
    if let Some(rose_cfg) = &cfg.rose {
        let mut cfg_batch = *rose_cfg;
        cfg_batch.seed = rng.random();
        let mut rose_rng = derive_rng(cfg_batch.seed, &[tag("rose-batch")]);
        let aug =
            fairness_aware_rose_with(&batch.a, &batch.s, &batch.y, &cfg_batch, &mut rose_rng)?;
        let (_, ids) = aug.sensitive_group_ids();
        Ok((aug.a, aug.y, ids))
    } else {
        let ids = sensitive_ids(&batch.s);
        Ok((batch.a, batch.y, ids))
    }
}

/// Mini-batch SGD on the composite objective for one client.
///
/// `round` keys the RNG stream so reruns and parallel execution agree.
pub fn local_train(
    params: &ModelParams,
    train: &TabularDataset,
    cfg: &FederationConfig,
    client_id: usize,
    round: usize,
) -> Result<(ModelParams, ClientTrace)> {
    if train.n() == 0 {
        return Err(Error::data(format!("client {client_id} has an empty training set")));
    }
    let mut params = params.clone();
    let mut rng = derive_rng(cfg.seed, &[tag("local"), client_id as u64, round as u64]);
    let epochs = cfg.epochs_for(client_id);
    let mut order: Vec<usize> = (0..train.n()).collect();
    let mut loss_sum = 0.0;
    let mut penalty_sum = 0.0;
    let mut batches = 0usize;

    for _epoch in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let (a, y, groups) = prepare_batch(gather_batch(train, chunk), cfg, &mut rng)?;
            let (_, grad, parts) = composite_objective(&params, &a, &y, &groups, &cfg.penalty)?;
            params = params.apply_update(&grad, cfg.lr);
            loss_sum += parts.loss;
            penalty_sum += parts.penalty;
            batches += 1;
        }
    }

    let denom = batches.max(1) as f64;
    Ok((
        params,
        ClientTrace {
            client: client_id,
            mean_loss: loss_sum / denom,
            mean_penalty: penalty_sum / denom,
            samples: train.n(),
            batches,
        },
    ))
}

/// A fixed number of extra SGD steps from the global model; evaluation-time
/// personalization. Uses the same objective the federation was trained
/// with (plain when lambda and gamma are zero).
fn personalize(
    global: &ModelParams,
    train: &TabularDataset,
    cfg: &FederationConfig,
    client_id: usize,
) -> Result<ModelParams> {
    let mut params = global.clone();
    if cfg.personalization_steps == 0 {
        return Ok(params);
    }
    let mut rng = derive_rng(cfg.seed, &[tag("personalize"), client_id as u64]);
    let mut order: Vec<usize> = (0..train.n()).collect();
    let mut taken = 0usize;
    while taken < cfg.personalization_steps {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            if taken == cfg.personalization_steps {
                break;
            }
            let (a, y, groups) = prepare_batch(gather_batch(train, chunk), cfg, &mut rng)?;
            let (_, grad, _) = composite_objective(&params, &a, &y, &groups, &cfg.penalty)?;
            params = params.apply_update(&grad, cfg.lr);
            taken += 1;
        }
    }
    Ok(params)
}

/// The client/server boundary: parameters leave a client as JSON and the
/// server parses them back. serde_json round-trips f64 exactly, so the
/// boundary costs nothing in precision.
fn ship(params: &ModelParams) -> String {
    params.to_json()
}

fn receive(wire: &str) -> Result<ModelParams> {
    ModelParams::from_json(wire)
}

/// Run the configured strategy over the clients' training splits.
pub fn run_federation(
    clients: &[ClientData],
    cfg: &FederationConfig,
) -> Result<FederationOutcome> {
    cfg.validate()?;
    if clients.is_empty() {
        return Err(Error::config("no clients supplied"));
    }
    if clients.len() != cfg.clients {
        return Err(Error::config(format!(
            "config names {} clients but {} datasets supplied",
            cfg.clients,
            clients.len()
        )));
    }
    let p_a = clients[0].train.p_a();
    let init = ModelParams::init(cfg.model, p_a, cfg.hidden_units, cfg.seed);

    match cfg.strategy {
        Strategy::Central => run_central(clients, cfg, init),
        Strategy::Local => run_local(clients, cfg, init),
        Strategy::FedAvg => run_fedavg(clients, cfg, init, false),
        Strategy::PFedAvg => run_fedavg(clients, cfg, init, true),
    }
}

fn run_central(
    clients: &[ClientData],
    cfg: &FederationConfig,
    init: ModelParams,
) -> Result<FederationOutcome> {
    // one pooled actor; epochs follow the first client's budget
    let pooled = concat_datasets(clients.iter().map(|c| &c.train))?;
    let mut params = init;
    let mut traces = Vec::new();
    for round in 0..cfg.rounds {
        let (next, trace) = local_train(&params, &pooled, cfg, 0, round)?;
        params = receive(&ship(&next))?;
        traces.push(RoundTrace {
            round,
            total_samples: trace.samples,
            clients: vec![trace],
            params_checksum: format!("{:016x}", fnv1a(params.to_json().as_bytes())),
        });
    }
    Ok(FederationOutcome { global: params, personalized: None, traces })
}

fn run_local(
    clients: &[ClientData],
    cfg: &FederationConfig,
    init: ModelParams,
) -> Result<FederationOutcome> {
    let results: Vec<Result<(ModelParams, Vec<ClientTrace>)>> = clients
        .par_iter()
        .enumerate()
        .map(|(c, data)| {
            let mut params = init.clone();
            let mut local_traces = Vec::new();
            for round in 0..cfg.rounds {
                let (next, trace) = local_train(&params, &data.train, cfg, c, round)?;
                params = next;
                local_traces.push(trace);
            }
            Ok((params, local_traces))
        })
        .collect();
    let mut models = Vec::with_capacity(clients.len());
    let mut per_round: Vec<Vec<ClientTrace>> = vec![Vec::new(); cfg.rounds];
    for r in results {
        let (params, local_traces) = r?;
        for (round, t) in local_traces.into_iter().enumerate() {
            per_round[round].push(t);
        }
        models.push(params);
    }
    let traces = per_round
        .into_iter()
        .enumerate()
        .map(|(round, clients)| RoundTrace {
            round,
            total_samples: clients.iter().map(|c| c.samples).sum(),
            params_checksum: String::new(),
            clients,
        })
        .collect();
    let weights: Vec<f64> = clients.iter().map(|c| c.train.n() as f64).collect();
    let global = aggregate(&models, &weights)?;
    Ok(FederationOutcome { global, personalized: Some(models), traces })
}

fn run_fedavg(
    clients: &[ClientData],
    cfg: &FederationConfig,
    init: ModelParams,
    personalized_eval: bool,
) -> Result<FederationOutcome> {
    let mut global = init;
    let mut traces = Vec::new();
    for round in 0..cfg.rounds {
        let wire_global = ship(&global);
        let results: Vec<Result<(String, ClientTrace)>> = clients
            .par_iter()
            .enumerate()
            .map(|(c, data)| {
                let local = receive(&wire_global)?;
                let (next, trace) = local_train(&local, &data.train, cfg, c, round)?;
                Ok((ship(&next), trace))
            })
            .collect();
        let mut shipped = Vec::with_capacity(clients.len());
        let mut round_clients = Vec::with_capacity(clients.len());
        for r in results {
            let (wire, trace) = r?;
            shipped.push(receive(&wire)?);
            round_clients.push(trace);
        }
        let weights: Vec<f64> = round_clients.iter().map(|t| t.samples as f64).collect();
        global = aggregate(&shipped, &weights)?;
        traces.push(RoundTrace {
            round,
            total_samples: round_clients.iter().map(|t| t.samples).sum(),
            clients: round_clients,
            params_checksum: format!("{:016x}", fnv1a(global.to_json().as_bytes())),
        });
    }
    let personalized = if personalized_eval {
        let models: Vec<Result<ModelParams>> = clients
            .par_iter()
            .enumerate()
            .map(|(c, data)| personalize(&global, &data.train, cfg, c))
            .collect();
        Some(models.into_iter().collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    Ok(FederationOutcome { global, personalized, traces })
}

/// Concatenate datasets row-wise (same schema expected).
pub fn concat_datasets<'a>(
    parts: impl Iterator<Item = &'a TabularDataset>,
) -> Result<TabularDataset> {
    let parts: Vec<&TabularDataset> = parts.collect();
    let first = *parts.first().ok_or_else(|| Error::data("nothing to concatenate"))?;
    let mut a_rows = Vec::new();
    let mut s_rows = Vec::new();
    let mut y = Vec::new();
    let mut row_ids = Vec::new();
    for ds in &parts {
        if ds.p_a() != first.p_a() || ds.p_s() != first.p_s() {
            return Err(Error::data("datasets disagree on shape"));
        }
        for i in 0..ds.n() {
            a_rows.push(ds.a.row(i).to_vec());
            s_rows.push(ds.s.row(i).to_vec());
            y.push(ds.y[i]);
            row_ids.push(ds.row_ids[i]);
        }
    }
    Ok(TabularDataset {
        a: Matrix::from_rows(a_rows),
        s: CategoryMatrix::from_rows(s_rows),
        y,
        schema: first.schema.clone(),
        feature_names: first.feature_names.clone(),
        continuous_mask: first.continuous_mask.clone(),
        row_ids,
        dropped_rows: 0,
    })
}
