//! Subgroup-balancing oversampler.
//!
//! Groups a batch by (sensitive combination, outcome) and equalizes every
//! present cell to a target count: oversized cells are downsampled without
//! replacement, undersized ones keep their originals and add synthetic rows
//! built from a randomly chosen seed row plus Gaussian noise scaled by the
//! cell's per-feature spread. Sensitive attributes and outcomes are copied
//! from the seed row untouched; cells absent from the batch are never
//! conjured.

use crate::error::{Error, Result};
use crate::matrix::{CategoryMatrix, Matrix};
use crate::rng::{derive_rng, tag};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TargetRule {
    /// Balance up to the largest (sensitive, outcome) cell in the batch.
    #[default]
    AutoMaxSubgroup,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingRule {
    /// h = factor * m^(-1/(p+4)) for a cell of m rows; shrinks with cell size.
    Silverman { factor: f64 },
    /// One fixed multiplier for every cell.
    Fixed { h: f64 },
}

impl Default for SmoothingRule {
    fn default() -> Self {
        SmoothingRule::Silverman { factor: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoseConfig {
    #[serde(default)]
    pub n_target: TargetRule,
    #[serde(default)]
    pub smoothing: SmoothingRule,
    #[serde(default)]
    pub seed: u64,
    /// Balance once per client dataset instead of per mini-batch.
    #[serde(default)]
    pub client_level: bool,
}

impl Default for RoseConfig {
    fn default() -> Self {
        RoseConfig {
            n_target: TargetRule::AutoMaxSubgroup,
            smoothing: SmoothingRule::default(),
            seed: 0,
            client_level: false,
        }
    }
}

impl RoseConfig {
    pub fn validate(&self) -> Result<()> {
        if let TargetRule::Fixed(n) = self.n_target {
            if n < 1 {
                return Err(Error::config("fixed oversampling target must be >= 1"));
            }
        }
        match self.smoothing {
            SmoothingRule::Silverman { factor } if factor <= 0.0 => {
                Err(Error::config("smoothing factor must be positive"))
            }
            SmoothingRule::Fixed { h } if h <= 0.0 => {
                Err(Error::config("smoothing h must be positive"))
            }
            _ => Ok(()),
        }
    }

    fn h_for_cell(&self, cell_size: usize, p_a: usize) -> f64 {
        match self.smoothing {
            SmoothingRule::Silverman { factor } => {
                factor * (cell_size as f64).powf(-1.0 / (p_a as f64 + 4.0))
            }
            SmoothingRule::Fixed { h } => h,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedBatch {
    pub a: Matrix,
    pub s: CategoryMatrix,
    pub y: Vec<u8>,
    /// True for generated rows.
    pub synthetic_mask: Vec<bool>,
}

impl AugmentedBatch {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Sensitive-only group ids per row (for the fairness penalty).
    pub fn sensitive_group_ids(&self) -> (usize, Vec<u32>) {
        let mut map: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        let mut ids = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let key = self.s.row(i).to_vec();
            let next = map.len() as u32;
            let id = *map.entry(key).or_insert(next);
            ids.push(id);
        }
        (map.len(), ids)
    }
}

/// Diagonal noise variances for one cell: (h * sd_j)^2 per feature, with
/// zero within-cell spread falling back to the batch-global spread.
pub fn estimate_sigma(
    a: &Matrix,
    cell_rows: &[usize],
    h: f64,
    global_sd: &[f64],
) -> Vec<f64> {
    let p = a.cols();
    let m = cell_rows.len();
    let mut sigma = vec![0.0; p];
    for j in 0..p {
        let sd = if m > 1 {
            let mean: f64 = cell_rows.iter().map(|&i| a.get(i, j)).sum::<f64>() / m as f64;
            let var: f64 = cell_rows
                .iter()
                .map(|&i| {
                    let d = a.get(i, j) - mean;
                    d * d
                })
                .sum::<f64>()
                / m as f64;
            var.sqrt()
        } else {
            0.0
        };
        let sd = if sd > 0.0 { sd } else { global_sd[j] };
        sigma[j] = (h * sd) * (h * sd);
    }
    sigma
}

fn global_sd(a: &Matrix) -> Vec<f64> {
    let n = a.rows().max(1) as f64;
    let p = a.cols();
    let mut out = vec![0.0; p];
    for j in 0..p {
        let mean: f64 = (0..a.rows()).map(|i| a.get(i, j)).sum::<f64>() / n;
        let var: f64 =
            (0..a.rows()).map(|i| (a.get(i, j) - mean).powi(2)).sum::<f64>() / n;
        out[j] = var.sqrt();
    }
    out
}

/// Balance one batch. Deterministic given `cfg.seed`.
pub fn fairness_aware_rose(
    a: &Matrix,
    s: &CategoryMatrix,
    y: &[u8],
    cfg: &RoseConfig,
) -> Result<AugmentedBatch> {
    let mut rng = derive_rng(cfg.seed, &[tag("rose")]);
    fairness_aware_rose_with(a, s, y, cfg, &mut rng)
}

/// Same as [`fairness_aware_rose`] but drawing from a caller-owned stream;
/// the training loop derives one stream per batch.
pub fn fairness_aware_rose_with(
    a: &Matrix,
    s: &CategoryMatrix,
    y: &[u8],
    cfg: &RoseConfig,
    rng: &mut ChaCha12Rng,
) -> Result<AugmentedBatch> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::data("cannot oversample an empty batch"));
    }
    let n = y.len();
    let mut cells: BTreeMap<(Vec<u32>, u8), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        cells.entry((s.row(i).to_vec(), y[i])).or_default().push(i);
    }

    let n_target = match cfg.n_target {
        TargetRule::AutoMaxSubgroup => {
            if cells.len() < 2 {
                // nothing to balance against; pass the batch through
                return Ok(AugmentedBatch {
                    a: a.clone(),
                    s: s.clone(),
                    y: y.to_vec(),
                    synthetic_mask: vec![false; n],
                });
            }
            cells.values().map(Vec::len).max().unwrap()
        }
        TargetRule::Fixed(v) => v,
    };

    let sds = global_sd(a);
    let p_a = a.cols();
    let mut out_a: Vec<Vec<f64>> = Vec::with_capacity(cells.len() * n_target);
    let mut out_s: Vec<Vec<u32>> = Vec::with_capacity(cells.len() * n_target);
    let mut out_y: Vec<u8> = Vec::with_capacity(cells.len() * n_target);
    let mut out_mask: Vec<bool> = Vec::with_capacity(cells.len() * n_target);

    for ((s_key, y_val), rows) in &cells {
        if rows.len() >= n_target {
            let mut chosen = rows.clone();
            chosen.shuffle(rng);
            chosen.truncate(n_target);
            chosen.sort_unstable();
            for &i in &chosen {
                out_a.push(a.row(i).to_vec());
                out_s.push(s_key.clone());
                out_y.push(*y_val);
                out_mask.push(false);
            }
        } else {
            for &i in rows {
                out_a.push(a.row(i).to_vec());
                out_s.push(s_key.clone());
                out_y.push(*y_val);
                out_mask.push(false);
            }
            let h = cfg.h_for_cell(rows.len(), p_a);
            let sigma = estimate_sigma(a, rows, h, &sds);
            let scale: Vec<f64> = sigma.iter().map(|v| v.sqrt()).collect();
            for _ in 0..(n_target - rows.len()) {
                let seed_row = rows[rng.random_range(0..rows.len())];
                let mut x = a.row(seed_row).to_vec();
                for (v, sc) in x.iter_mut().zip(&scale) {
                    let z: f64 = StandardNormal.sample(rng);
                    *v += sc * z;
                }
                out_a.push(x);
                out_s.push(s_key.clone());
                out_y.push(*y_val);
                out_mask.push(true);
            }
        }
    }

    Ok(AugmentedBatch {
        a: Matrix::from_rows(out_a),
        s: CategoryMatrix::from_rows(out_s),
        y: out_y,
        synthetic_mask: out_mask,
    })
}
