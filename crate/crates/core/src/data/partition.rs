//! Client partitioning and train/val/test splitting.

use crate::data::dataset::TabularDataset;
use crate::data::subgroup::SubgroupIndex;
use crate::error::{Error, Result};
use crate::rng::{derive_rng, tag};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PartitionMode {
    Homogeneous,
    /// Stratified by sensitive combination: `weights[client][stratum]` gives
    /// each client's share of that stratum's rows.
    AttributeSkewed { weights: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub client_count: usize,
    #[serde(flatten)]
    pub mode: PartitionMode,
    pub seed: u64,
}

/// Split rows across clients. Disjoint and exhaustive by construction;
/// fails if some client would see only one outcome class.
pub fn partition(ds: &TabularDataset, plan: &PartitionPlan) -> Result<Vec<TabularDataset>> {
    if plan.client_count < 2 {
        return Err(Error::config("partition needs at least 2 clients"));
    }
    let mut rng = derive_rng(plan.seed, &[tag("partition")]);
    let assignments: Vec<Vec<usize>> = match &plan.mode {
        PartitionMode::Homogeneous => {
            let mut order: Vec<usize> = (0..ds.n()).collect();
            order.shuffle(&mut rng);
            chunk_even(&order, plan.client_count)
        }
        PartitionMode::AttributeSkewed { weights } => {
            let index = SubgroupIndex::build(ds, false)?;
            if weights.len() != plan.client_count {
                return Err(Error::config(format!(
                    "skew weights rows ({}) must equal client count ({})",
                    weights.len(),
                    plan.client_count
                )));
            }
            for (c, w) in weights.iter().enumerate() {
                if w.len() != index.k() {
                    return Err(Error::config(format!(
                        "client {c} lists {} stratum weights, dataset has {} strata",
                        w.len(),
                        index.k()
                    )));
                }
                if w.iter().any(|&v| v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::config(format!(
                        "client {c} skew weights must be non-negative and sum > 0"
                    )));
                }
            }
            let mut out = vec![Vec::new(); plan.client_count];
            for g in 0..index.k() {
                let mut rows = index.members(g).to_vec();
                rows.shuffle(&mut rng);
                // Normalize this stratum's weights across clients, then hand
                // out counts by largest remainder.
                let col: Vec<f64> = weights.iter().map(|w| w[g]).collect();
                let total: f64 = col.iter().sum();
                let shares: Vec<f64> =
                    col.iter().map(|v| v / total * rows.len() as f64).collect();
                let counts = largest_remainder(&shares, rows.len());
                let mut offset = 0;
                for (c, &cnt) in counts.iter().enumerate() {
                    out[c].extend_from_slice(&rows[offset..offset + cnt]);
                    offset += cnt;
                }
            }
            out
        }
    };

    let mut clients = Vec::with_capacity(plan.client_count);
    for (c, mut idx) in assignments.into_iter().enumerate() {
        idx.sort_unstable();
        let client = ds.select_rows(&idx);
        for class in [0u8, 1u8] {
            if !client.y.contains(&class) {
                return Err(Error::data(format!(
                    "client {c} received no samples of outcome class {class}"
                )));
            }
        }
        clients.push(client);
    }
    Ok(clients)
}

/// Outcome-stratified train/val/test split, deterministic under `seed`.
pub fn split_train_val_test(
    ds: &TabularDataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(TabularDataset, TabularDataset, TabularDataset)> {
    let (r_train, r_val, r_test) = ratios;
    if r_train <= 0.0 || r_val <= 0.0 || r_test <= 0.0 {
        return Err(Error::config("split ratios must be positive"));
    }
    if ((r_train + r_val + r_test) - 1.0).abs() > 1e-9 {
        return Err(Error::config("split ratios must sum to 1"));
    }
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for class in [0u8, 1u8] {
        let mut rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.y[i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        let mut rng = derive_rng(seed, &[tag("split"), u64::from(class)]);
        rows.shuffle(&mut rng);
        let shares = [
            r_train * rows.len() as f64,
            r_val * rows.len() as f64,
            r_test * rows.len() as f64,
        ];
        let counts = largest_remainder(&shares, rows.len());
        let mut offset = 0;
        for (part, &cnt) in parts.iter_mut().zip(&counts) {
            part.extend_from_slice(&rows[offset..offset + cnt]);
            offset += cnt;
        }
    }
    for (name, part) in ["train", "val", "test"].iter().zip(&parts) {
        if part.is_empty() {
            return Err(Error::data(format!("{name} split would be empty")));
        }
    }
    let split = |idx: &mut Vec<usize>| {
        idx.sort_unstable();
        ds.select_rows(idx)
    };
    let [mut tr, mut va, mut te] = parts;
    Ok((split(&mut tr), split(&mut va), split(&mut te)))
}

/// Split a shuffled list into `k` near-even chunks (first chunks get the
/// remainder).
fn chunk_even(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = order.len();
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut offset = 0;
    for c in 0..k {
        let len = base + usize::from(c < extra);
        out.push(order[offset..offset + len].to_vec());
        offset += len;
    }
    out
}

/// Integer apportionment: floor everything, then give the remaining units
/// to the largest fractional parts (ties broken by position).
fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = shares.iter().map(|&s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut rema: Vec<(f64, usize)> = shares
        .iter()
        .enumerate()
        .map(|(i, &s)| (s - s.floor(), i))
        .collect();
    rema.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..total.saturating_sub(assigned) {
        counts[rema[k % rema.len()].1] += 1;
    }
    counts
}
