//! Dataset ingestion, subgroup indexing, partitioning, and synthesis.

pub mod dataset;
pub mod loader;
pub mod partition;
pub mod schema;
pub mod subgroup;
pub mod synthetic;

pub use dataset::{StandardizeStats, TabularDataset};
pub use loader::load_csv;
pub use partition::{partition, split_train_val_test, PartitionMode, PartitionPlan};
pub use schema::{ColumnKind, ColumnSchema, ColumnSpec};
pub use subgroup::{GroupKey, SubgroupIndex};
pub use synthetic::{eight_group_spec, generate_synthetic, SyntheticSpec, SyntheticSubgroup};
