//! CSV ingestion: header-mapped column selection, missing-row dropping,
//! one-hot expansion, and standardization.

use crate::data::dataset::TabularDataset;
use crate::data::schema::{ColumnKind, ColumnSchema};
use crate::error::{Error, Result};
use crate::matrix::{CategoryMatrix, Matrix};
use std::collections::HashMap;
use std::path::Path;

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?"
}

/// Load a UTF-8, comma-delimited CSV with a header row.
///
/// A row is dropped when any cell in the file is missing ("?" or empty),
/// whether or not the schema uses that column. Continuous columns are
/// standardized over the surviving rows; categorical features one-hot
/// expand into the A block; sensitive columns stay category indices.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<TabularDataset> {
    schema.validate()?;
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_path(path)?;

    let header: Vec<String> =
        reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let pos_of: HashMap<&str, usize> =
        header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    let mut col_pos = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        match pos_of.get(col.name.as_str()) {
            Some(&p) => col_pos.push(p),
            None => {
                return Err(Error::schema(format!(
                    "schema column '{}' not found in CSV header of {}",
                    col.name,
                    path.display()
                )))
            }
        }
    }

    // Expanded A layout: continuous -> one column, categorical -> one per level.
    let mut feature_names = Vec::new();
    let mut continuous_mask = Vec::new();
    for col in schema.feature_columns() {
        match col.kind {
            ColumnKind::Continuous => {
                feature_names.push(col.name.clone());
                continuous_mask.push(true);
            }
            ColumnKind::Categorical => {
                for cat in &col.categories {
                    feature_names.push(format!("{}={}", col.name, cat));
                    continuous_mask.push(false);
                }
            }
            _ => unreachable!(),
        }
    }
    let p_a = feature_names.len();

    let cat_index: HashMap<(&str, &str), u32> = schema
        .columns
        .iter()
        .flat_map(|c| {
            c.categories
                .iter()
                .enumerate()
                .map(move |(i, cat)| ((c.name.as_str(), cat.as_str()), i as u32))
        })
        .collect();

    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut s_rows: Vec<Vec<u32>> = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0usize;
    let mut row_ids = Vec::new();

    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let mut a_row = vec![0.0; p_a];
        let mut s_row = Vec::new();
        let mut a_col = 0usize;
        for (col, &pos) in schema.columns.iter().zip(&col_pos) {
            let cell = record.get(pos).unwrap_or("").trim();
            match col.kind {
                ColumnKind::Continuous => {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::data(format!(
                            "row {}: column '{}' value '{}' is not numeric",
                            line + 2,
                            col.name,
                            cell
                        ))
                    })?;
                    a_row[a_col] = v;
                    a_col += 1;
                }
                ColumnKind::Categorical => {
                    let idx = lookup_category(&cat_index, col.name.as_str(), cell, line)?;
                    a_row[a_col + idx as usize] = 1.0;
                    a_col += col.categories.len();
                }
                ColumnKind::SensitiveCategorical => {
                    s_row.push(lookup_category(&cat_index, col.name.as_str(), cell, line)?);
                }
                ColumnKind::Outcome => {
                    let idx = lookup_category(&cat_index, col.name.as_str(), cell, line)?;
                    y.push(idx as u8);
                }
            }
        }
        row_ids.push(a_rows.len() as u64);
        a_rows.push(a_row);
        s_rows.push(s_row);
    }

    if y.is_empty() {
        return Err(Error::data(format!(
            "no rows left after dropping {dropped} incomplete rows from {}",
            path.display()
        )));
    }

    let mut ds = TabularDataset {
        a: Matrix::from_rows(a_rows),
        s: CategoryMatrix::from_rows(s_rows),
        y,
        schema: schema.clone(),
        feature_names,
        continuous_mask,
        row_ids,
        dropped_rows: dropped,
    };
    let stats = ds.standardize_fit();
    ds.standardize_apply(&stats);
    ds.validate()?;
    Ok(ds)
}

fn lookup_category(
    index: &HashMap<(&str, &str), u32>,
    col: &str,
    cell: &str,
    line: usize,
) -> Result<u32> {
    index.get(&(col, cell)).copied().ok_or_else(|| {
        Error::data(format!(
            "row {}: column '{}' has unknown category '{}'",
            line + 2,
            col,
            cell
        ))
    })
}
