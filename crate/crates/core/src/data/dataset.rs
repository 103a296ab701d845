//! In-memory tabular dataset: non-sensitive feature block, sensitive
//! category indices, and binary outcomes.

use crate::data::schema::ColumnSchema;
use crate::error::{Error, Result};
use crate::matrix::{CategoryMatrix, Matrix};
use serde::Serialize;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct TabularDataset {
    /// Non-sensitive features, n x p_A. Categorical features arrive one-hot
    /// expanded; sensitive attributes never appear here.
    pub a: Matrix,
    /// Sensitive attribute category indices, n x p_S.
    pub s: CategoryMatrix,
    /// Binary outcomes.
    pub y: Vec<u8>,
    pub schema: ColumnSchema,
    /// Names of the expanded feature columns ("age", "workclass=Private", ...).
    pub feature_names: Vec<String>,
    /// Which expanded feature columns are continuous (standardization targets).
    pub continuous_mask: Vec<bool>,
    /// Stable per-row ids, preserved by partition/split.
    pub row_ids: Vec<u64>,
    /// Rows dropped during ingestion for missing values.
    pub dropped_rows: usize,
}

/// Per-column standardization statistics fitted on a training split.
#[derive(Debug, Clone, Serialize)]
pub struct StandardizeStats {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl TabularDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p_a(&self) -> usize {
        self.a.cols()
    }

    pub fn p_s(&self) -> usize {
        self.s.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.rows() != self.y.len() || self.s.rows() != self.y.len() {
            return Err(Error::data(format!(
                "row count mismatch: a={} s={} y={}",
                self.a.rows(),
                self.s.rows(),
                self.y.len()
            )));
        }
        if self.row_ids.len() != self.y.len() {
            return Err(Error::data("row id count mismatch"));
        }
        if !self.a.is_finite() {
            return Err(Error::data("non-finite feature value"));
        }
        if self.y.iter().any(|&v| v > 1) {
            return Err(Error::data("outcome values must be 0 or 1"));
        }
        Ok(())
    }

    pub fn sensitive_row(&self, i: usize) -> &[u32] {
        self.s.row(i)
    }

    /// Gather rows into a new dataset, preserving order and row ids.
    pub fn select_rows(&self, idx: &[usize]) -> TabularDataset {
        TabularDataset {
            a: self.a.select_rows(idx),
            s: self.s.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            schema: self.schema.clone(),
            feature_names: self.feature_names.clone(),
            continuous_mask: self.continuous_mask.clone(),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
            dropped_rows: 0,
        }
    }

    /// Fit per-column mean/sd over this dataset's continuous columns.
    /// Population convention; zero-variance columns get sd 1 so they pass
    /// through unchanged.
    pub fn standardize_fit(&self) -> StandardizeStats {
        let n = self.n().max(1) as f64;
        let p = self.p_a();
        let mut means = vec![0.0; p];
        let mut sds = vec![1.0; p];
        for (j, &is_cont) in self.continuous_mask.iter().enumerate() {
            if !is_cont {
                continue;
            }
            let mut sum = 0.0;
            for i in 0..self.n() {
                sum += self.a.get(i, j);
            }
            let mean = sum / n;
            let mut var = 0.0;
            for i in 0..self.n() {
                let d = self.a.get(i, j) - mean;
                var += d * d;
            }
            let sd = (var / n).sqrt();
            means[j] = mean;
            sds[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        StandardizeStats { means, sds }
    }

    /// Apply frozen standardization statistics in place.
    pub fn standardize_apply(&mut self, stats: &StandardizeStats) {
        for i in 0..self.n() {
            let row = self.a.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                if self.continuous_mask[j] {
                    *v = (*v - stats.means[j]) / stats.sds[j];
                }
            }
        }
    }

    /// Debug snapshot: one JSON object per row.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            id: u64,
            a: &'a [f64],
            s: Vec<u32>,
            y: u8,
        }
        for i in 0..self.n() {
            let row = Row {
                id: self.row_ids[i],
                a: self.a.row(i),
                s: self.sensitive_row(i).to_vec(),
                y: self.y[i],
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{ColumnKind, ColumnSpec};

    pub(crate) fn tiny_schema(p_s: usize) -> ColumnSchema {
        let mut cols = vec![ColumnSpec {
            name: "x".into(),
            kind: ColumnKind::Continuous,
            categories: vec![],
        }];
        for k in 0..p_s {
            cols.push(ColumnSpec {
                name: format!("s{k}"),
                kind: ColumnKind::SensitiveCategorical,
                categories: vec!["0".into(), "1".into()],
            });
        }
        cols.push(ColumnSpec {
            name: "y".into(),
            kind: ColumnKind::Outcome,
            categories: vec!["0".into(), "1".into()],
        });
        ColumnSchema::new(cols).unwrap()
    }

    fn toy() -> TabularDataset {
        TabularDataset {
            a: Matrix::from_rows(vec![vec![1.0, 0.0], vec![3.0, 1.0], vec![5.0, 0.0]]),
            s: CategoryMatrix::from_rows(vec![vec![0], vec![1], vec![0]]),
            y: vec![0, 1, 0],
            schema: tiny_schema(1),
            feature_names: vec!["x".into(), "c=1".into()],
            continuous_mask: vec![true, false],
            row_ids: vec![0, 1, 2],
            dropped_rows: 0,
        }
    }

    #[test]
    fn standardize_hits_zero_mean_unit_variance() {
        let mut ds = toy();
        let stats = ds.standardize_fit();
        ds.standardize_apply(&stats);
        let col: Vec<f64> = (0..3).map(|i| ds.a.get(i, 0)).collect();
        let mean: f64 = col.iter().sum::<f64>() / 3.0;
        let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
        // one-hot column untouched
        assert_eq!(ds.a.get(1, 1), 1.0);
    }

    #[test]
    fn select_rows_preserves_ids() {
        let ds = toy();
        let sub = ds.select_rows(&[2, 1]);
        assert_eq!(sub.row_ids, vec![2, 1]);
        assert_eq!(sub.y, vec![0, 1]);
    }
}
