//! Synthetic imbalanced-dataset generator.
//!
//! Stand-in for restricted clinical data at CI scale: per-subgroup Gaussian
//! features with a logistic ground-truth outcome, configurable subgroup
//! prevalences and outcome shifts so disparity and imbalance can be dialed
//! in precisely.

use crate::data::dataset::TabularDataset;
use crate::data::schema::{ColumnKind, ColumnSchema, ColumnSpec};
use crate::error::{Error, Result};
use crate::matrix::{CategoryMatrix, Matrix};
use crate::rng::{derive_rng, tag};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSubgroup {
    /// Sensitive category indices identifying the subgroup.
    pub sensitive: Vec<u32>,
    /// Sampling probability of the subgroup (normalized over the table).
    pub prevalence: f64,
    /// Mean feature vector of the subgroup.
    #[serde(default)]
    pub feature_shift: Vec<f64>,
    /// Additive logit shift; drives group-dependent outcome prevalence.
    #[serde(default)]
    pub outcome_shift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub seed: u64,
    pub feature_dim: usize,
    /// Logistic ground-truth coefficients over the features.
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    /// Feature standard deviation around the subgroup mean.
    pub noise_scale: f64,
    pub subgroups: Vec<SyntheticSubgroup>,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::config("synthetic spec needs n >= 50"));
        }
        if self.subgroups.len() < 2 {
            return Err(Error::config("synthetic spec needs at least 2 subgroups"));
        }
        if self.coefficients.len() != self.feature_dim {
            return Err(Error::config("coefficient vector length must equal feature_dim"));
        }
        if self.noise_scale <= 0.0 {
            return Err(Error::config("noise_scale must be positive"));
        }
        let arity = self.subgroups[0].sensitive.len();
        for (i, g) in self.subgroups.iter().enumerate() {
            if !(g.prevalence > 0.0 && g.prevalence < 1.0) {
                return Err(Error::config(format!(
                    "subgroup {i} prevalence must lie in (0,1), got {}",
                    g.prevalence
                )));
            }
            if g.sensitive.len() != arity {
                return Err(Error::config("subgroups disagree on sensitive arity"));
            }
            if !g.feature_shift.is_empty() && g.feature_shift.len() != self.feature_dim {
                return Err(Error::config(format!(
                    "subgroup {i} feature_shift length must equal feature_dim"
                )));
            }
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TabularDataset> {
    spec.validate()?;
    let mut rng = derive_rng(spec.seed, &[tag("synthetic")]);
    let total: f64 = spec.subgroups.iter().map(|g| g.prevalence).sum();
    let cum: Vec<f64> = spec
        .subgroups
        .iter()
        .scan(0.0, |acc, g| {
            *acc += g.prevalence / total;
            Some(*acc)
        })
        .collect();

    let mut a_rows = Vec::with_capacity(spec.n);
    let mut s_rows = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let u: f64 = rng.random();
        let g = cum.iter().position(|&c| u <= c).unwrap_or(spec.subgroups.len() - 1);
        let grp = &spec.subgroups[g];
        let mut x = vec![0.0; spec.feature_dim];
        for (j, v) in x.iter_mut().enumerate() {
            let shift = grp.feature_shift.get(j).copied().unwrap_or(0.0);
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = shift + spec.noise_scale * z;
        }
        let logit = spec.intercept
            + grp.outcome_shift
            + x.iter().zip(&spec.coefficients).map(|(xi, ci)| xi * ci).sum::<f64>();
        let p = 1.0 / (1.0 + (-logit).exp());
        let label = u8::from(rng.random::<f64>() < p);
        a_rows.push(x);
        s_rows.push(grp.sensitive.clone());
        y.push(label);
    }

    let arity = spec.subgroups[0].sensitive.len();
    let mut cols = Vec::new();
    for j in 0..spec.feature_dim {
        cols.push(ColumnSpec {
            name: format!("f{j}"),
            kind: ColumnKind::Continuous,
            categories: vec![],
        });
    }
    for k in 0..arity {
        let levels = spec.subgroups.iter().map(|g| g.sensitive[k]).max().unwrap_or(0) + 1;
        cols.push(ColumnSpec {
            name: format!("s{k}"),
            kind: ColumnKind::SensitiveCategorical,
            categories: (0..levels).map(|v| v.to_string()).collect(),
        });
    }
    cols.push(ColumnSpec {
        name: "y".into(),
        kind: ColumnKind::Outcome,
        categories: vec!["0".into(), "1".into()],
    });

    let ds = TabularDataset {
        a: Matrix::from_rows(a_rows),
        s: CategoryMatrix::from_rows(s_rows),
        y,
        schema: ColumnSchema::new(cols)?,
        feature_names: (0..spec.feature_dim).map(|j| format!("f{j}")).collect(),
        continuous_mask: vec![true; spec.feature_dim],
        row_ids: (0..spec.n as u64).collect(),
        dropped_rows: 0,
    };
    ds.validate()?;
    Ok(ds)
}

/// Eight (2x2x2) subgroups with one rare cell and group-dependent outcome
/// prevalence; the standard fixture for imbalance experiments.
pub fn eight_group_spec(n: usize, seed: u64) -> SyntheticSpec {
    let mut subgroups = Vec::new();
    // prevalences sum to 1; last cell is rare (0.8%)
    let prevalences = [0.30, 0.22, 0.16, 0.12, 0.09, 0.06, 0.042, 0.008];
    let shifts = [0.8, 0.5, 0.2, 0.0, -0.2, -0.5, -0.8, -1.1];
    let mut i = 0;
    for s0 in 0..2u32 {
        for s1 in 0..2u32 {
            for s2 in 0..2u32 {
                subgroups.push(SyntheticSubgroup {
                    sensitive: vec![s0, s1, s2],
                    prevalence: prevalences[i],
                    feature_shift: vec![0.3 * f64::from(s0) - 0.15, 0.2 * f64::from(s1), 0.0],
                    outcome_shift: shifts[i],
                });
                i += 1;
            }
        }
    }
    SyntheticSpec {
        n,
        seed,
        feature_dim: 3,
        coefficients: vec![1.2, -0.8, 0.5],
        intercept: -0.4,
        noise_scale: 1.0,
        subgroups,
    }
}
