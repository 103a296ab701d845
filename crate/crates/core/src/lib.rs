//! Fairness-aware federated learning simulator.
//!
//! The pieces, bottom up: tabular datasets with sensitive attributes kept
//! out of the model's feature block ([`data`]), from-scratch linear and
//! FCNN predictors ([`model`]), group disparity metrics ([`metrics`]), a
//! pairwise fairness penalty with composite objective ([`penalty`]),
//! subgroup-balancing oversampling ([`rose`]), the federated training loop
//! ([`fed`]), hyperparameter selection ([`tune`]), and the config-driven
//! experiment harness ([`experiment`]) behind the `fedida` CLI.

pub mod data;
pub mod error;
pub mod experiment;
pub mod fed;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod penalty;
pub mod rng;
pub mod rose;
pub mod tune;

pub use error::{Error, Result};
