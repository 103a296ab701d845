//! Subgroup index: rows grouped by their sensitive-attribute combination,
//! optionally intersected with the outcome.

use crate::data::dataset::TabularDataset;
use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub sensitive: Vec<u32>,
    pub outcome: Option<u8>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sensitive.iter().map(u32::to_string).collect();
        write!(f, "s[{}]", parts.join(","))?;
        if let Some(y) = self.outcome {
            write!(f, "|y={y}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SubgroupIndex {
    keys: Vec<GroupKey>,
    members: Vec<Vec<usize>>,
    /// For each row, the index into `keys` of its group.
    row_group: Vec<u32>,
    by_outcome: bool,
}

impl SubgroupIndex {
    /// Group rows by sensitive combination (and outcome when requested).
    /// Only combinations actually present appear; keys are sorted so the
    /// ordering is deterministic.
    pub fn from_rows<'a>(
        sensitive: impl Iterator<Item = &'a [u32]>,
        y: &[u8],
        by_outcome: bool,
    ) -> Result<Self> {
        let mut map: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
        let mut n = 0usize;
        for (i, s_row) in sensitive.enumerate() {
            let key = GroupKey {
                sensitive: s_row.to_vec(),
                outcome: by_outcome.then(|| y[i]),
            };
            map.entry(key).or_default().push(i);
            n += 1;
        }
        if n == 0 {
            return Err(Error::data("cannot index an empty dataset"));
        }
        if y.len() != n {
            return Err(Error::data("outcome length does not match sensitive rows"));
        }
        let keys: Vec<GroupKey> = map.keys().cloned().collect();
        let members: Vec<Vec<usize>> = map.into_values().collect();
        let mut row_group = vec![0u32; n];
        for (g, rows) in members.iter().enumerate() {
            for &r in rows {
                row_group[r] = g as u32;
            }
        }
        Ok(SubgroupIndex { keys, members, row_group, by_outcome })
    }

    pub fn build(ds: &TabularDataset, by_outcome: bool) -> Result<Self> {
        Self::from_rows((0..ds.n()).map(|i| ds.sensitive_row(i)), &ds.y, by_outcome)
    }

    pub fn k(&self) -> usize {
        self.keys.len()
    }

    pub fn by_outcome(&self) -> bool {
        self.by_outcome
    }

    pub fn keys(&self) -> &[GroupKey] {
        &self.keys
    }

    pub fn members(&self, g: usize) -> &[usize] {
        &self.members[g]
    }

    pub fn size(&self, g: usize) -> usize {
        self.members[g].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.row_group.len()
    }

    pub fn group_of_row(&self, row: usize) -> usize {
        self.row_group[row] as usize
    }

    pub fn row_groups(&self) -> &[u32] {
        &self.row_group
    }

    /// Collapse an outcome-aware index to sensitive-only group ids per row.
    /// Used where grouping must ignore the outcome (the fairness penalty).
    pub fn sensitive_only_groups(&self) -> (usize, Vec<u32>) {
        let mut map: BTreeMap<&[u32], u32> = BTreeMap::new();
        for key in &self.keys {
            let next = map.len() as u32;
            map.entry(key.sensitive.as_slice()).or_insert(next);
        }
        let remap: Vec<u32> = self.keys.iter().map(|k| map[k.sensitive.as_slice()]).collect();
        let rows = self.row_group.iter().map(|&g| remap[g as usize]).collect();
        (map.len(), rows)
    }
}
