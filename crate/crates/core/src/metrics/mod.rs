//! Predictive and group fairness metrics.

pub mod auroc;
pub mod parity;
pub mod probe;

pub use auroc::{auroc, auroc_pair_count};
pub use parity::{
    demographic_parity, dfpr, dppv, evaluate, group_fprs, group_positive_rates, group_ppvs,
    FairnessReport, MetricConfig, MetricMode,
};
pub use probe::{min_group_rate, perturbation_probe, ProbeMetric, ProbeOutcome};
