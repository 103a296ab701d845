//! Column schema: which CSV columns are features, sensitive attributes,
//! and the outcome, plus categorical level lists.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    SensitiveCategorical,
    Outcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category labels; required for categorical kinds.
    /// For the outcome column this is [negative_label, positive_label].
    #[serde(default)]
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnSchema {
    pub columns: Vec<ColumnSpec>,
}

impl ColumnSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = ColumnSchema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let schema: ColumnSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let outcomes = self.columns.iter().filter(|c| c.kind == ColumnKind::Outcome).count();
        if outcomes != 1 {
            return Err(Error::schema(format!(
                "schema must declare exactly one outcome column, found {outcomes}"
            )));
        }
        if !self.columns.iter().any(|c| c.kind == ColumnKind::SensitiveCategorical) {
            return Err(Error::schema("schema must declare at least one sensitive column"));
        }
        let mut names = HashSet::new();
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::schema(format!("duplicate column name '{}'", col.name)));
            }
            match col.kind {
                ColumnKind::Continuous => {
                    if !col.categories.is_empty() {
                        return Err(Error::schema(format!(
                            "continuous column '{}' must not list categories",
                            col.name
                        )));
                    }
                }
                ColumnKind::Outcome => {
                    if col.categories.len() != 2 {
                        return Err(Error::schema(format!(
                            "outcome column '{}' needs exactly two categories (negative, positive)",
                            col.name
                        )));
                    }
                }
                ColumnKind::Categorical | ColumnKind::SensitiveCategorical => {
                    if col.categories.is_empty() {
                        return Err(Error::schema(format!(
                            "categorical column '{}' needs a non-empty category list",
                            col.name
                        )));
                    }
                }
            }
            let unique: HashSet<&str> = col.categories.iter().map(String::as_str).collect();
            if unique.len() != col.categories.len() {
                return Err(Error::schema(format!(
                    "column '{}' lists duplicate categories",
                    col.name
                )));
            }
        }
        Ok(())
    }

    pub fn outcome(&self) -> &ColumnSpec {
        self.columns.iter().find(|c| c.kind == ColumnKind::Outcome).expect("validated schema")
    }

    pub fn sensitive_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.kind == ColumnKind::SensitiveCategorical)
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns
            .iter()
            .filter(|c| matches!(c.kind, ColumnKind::Continuous | ColumnKind::Categorical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(name: &str, kind: ColumnKind, cats: &[&str]) -> ColumnSpec {
        ColumnSpec {
            name: name.to_string(),
            kind,
            categories: cats.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn accepts_minimal_valid_schema() {
        let schema = ColumnSchema::new(vec![
            col("x", ColumnKind::Continuous, &[]),
            col("s", ColumnKind::SensitiveCategorical, &["a", "b"]),
            col("y", ColumnKind::Outcome, &["no", "yes"]),
        ]);
        assert!(schema.is_ok());
    }

    #[test]
    fn rejects_missing_outcome() {
        let err = ColumnSchema::new(vec![
            col("x", ColumnKind::Continuous, &[]),
            col("s", ColumnKind::SensitiveCategorical, &["a", "b"]),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("outcome"));
    }

    #[test]
    fn rejects_two_outcomes_and_duplicate_categories() {
        assert!(ColumnSchema::new(vec![
            col("s", ColumnKind::SensitiveCategorical, &["a", "b"]),
            col("y", ColumnKind::Outcome, &["no", "yes"]),
            col("z", ColumnKind::Outcome, &["no", "yes"]),
        ])
        .is_err());
        assert!(ColumnSchema::new(vec![
            col("s", ColumnKind::SensitiveCategorical, &["a", "a"]),
            col("y", ColumnKind::Outcome, &["no", "yes"]),
        ])
        .is_err());
    }

    #[test]
    fn rejects_missing_sensitive() {
        let err = ColumnSchema::new(vec![
            col("x", ColumnKind::Continuous, &[]),
            col("y", ColumnKind::Outcome, &["no", "yes"]),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("sensitive"));
    }
}
