//! Experiment configuration: one JSON file drives a full pipeline.

use crate::data::{PartitionMode, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fed::{FederationConfig, Strategy};
use crate::metrics::{MetricConfig, MetricMode};
use crate::penalty::PenaltyConfig;
use crate::rose::RoseConfig;
use crate::tune::LambdaSearchConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// CSV with a JSON schema file; the Adult data ships this way.
    AdultCsv { path: PathBuf, schema_path: PathBuf },
    Synthetic { spec: SyntheticSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub client_count: usize,
    #[serde(flatten)]
    pub mode: PartitionMode,
}

/// A named training arm: the shared federation settings plus this arm's
/// strategy and regularization choices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetupSpec {
    pub name: String,
    pub strategy: Strategy,
    #[serde(default)]
    pub penalty: Option<PenaltyConfig>,
    #[serde(default)]
    pub rose: Option<RoseConfig>,
    #[serde(default)]
    pub personalization_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalSpec {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_min_group")]
    pub min_group_size: usize,
    #[serde(default = "default_replicates")]
    pub bootstrap_replicates: usize,
    #[serde(default)]
    pub metric_mode: MetricMode,
}

fn default_threshold() -> f64 {
    0.5
}
fn default_min_group() -> usize {
    5
}
fn default_replicates() -> usize {
    30
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            threshold: default_threshold(),
            min_group_size: default_min_group(),
            bootstrap_replicates: default_replicates(),
            metric_mode: MetricMode::Hard,
        }
    }
}

impl EvalSpec {
    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            threshold: self.threshold,
            min_group_size: self.min_group_size,
            mode: self.metric_mode,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunerSpec {
    pub lambda: LambdaSearchConfig,
    pub gamma_range: (f64, f64),
    pub gamma_m: usize,
    pub gamma_m_prime: usize,
    /// Fairness weight used by the gamma stages (Table S3 style fixed
    /// lambda); falls back to the federation's configured lambda.
    #[serde(default)]
    pub gamma_lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceSpec {
    pub baseline_setup: String,
    pub fedida_setup: String,
    #[serde(default = "default_true")]
    pub stratified: bool,
    /// Rows drawn per subgroup in stratified mode; mean subgroup size
    /// when unset.
    #[serde(default)]
    pub per_group: Option<usize>,
    /// Metric mode for the replicate metrics; the sensitivity analysis
    /// is stated over score means, so soft is the faithful default.
    #[serde(default = "default_soft")]
    pub metric_mode: crate::metrics::MetricMode,
}

fn default_soft() -> crate::metrics::MetricMode {
    crate::metrics::MetricMode::Soft
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSpec {
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub rose: Option<RoseConfig>,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSource,
    pub partition: PartitionSpec,
    #[serde(default = "default_split")]
    pub split_ratios: (f64, f64, f64),
    pub federation: FederationConfig,
    #[serde(default)]
    pub setups: Vec<SetupSpec>,
    #[serde(default)]
    pub evaluation: EvalSpec,
    #[serde(default)]
    pub tuner: Option<TunerSpec>,
    #[serde(default)]
    pub variance_study: Option<VarianceSpec>,
    #[serde(default)]
    pub ablation: Option<AblationSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_split() -> (f64, f64, f64) {
    (0.7, 0.1, 0.2)
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.as_ref().display()))
        })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.partition.client_count != self.federation.clients {
            return Err(Error::config(format!(
                "partition.client_count ({}) must equal federation.clients ({})",
                self.partition.client_count, self.federation.clients
            )));
        }
        self.federation.validate()?;
        for setup in &self.setups {
            if let Some(p) = &setup.penalty {
                p.validate()?;
            }
            if let Some(r) = &setup.rose {
                r.validate()?;
            }
        }
        let (a, b, c) = self.split_ratios;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::config("split_ratios must be positive and sum to 1"));
        }
        if !(0.0..=1.0).contains(&self.evaluation.threshold) {
            return Err(Error::config("evaluation.threshold must lie in [0, 1]"));
        }
        if let Some(v) = &self.variance_study {
            for name in [&v.baseline_setup, &v.fedida_setup] {
                if !self.setups.iter().any(|s| &s.name == name) {
                    return Err(Error::config(format!(
                        "variance_study references unknown setup '{name}'"
                    )));
                }
            }
        }
        if let Some(t) = &self.tuner {
            t.lambda.validate()?;
            if t.gamma_m < 2 || t.gamma_m_prime < 2 {
                return Err(Error::config("tuner grid sizes must be >= 2"));
            }
        }
        let mut names: Vec<&str> = self.setups.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.setups.len() {
            return Err(Error::config("setup names must be unique"));
        }
        Ok(())
    }

    /// The concrete federation settings for one named setup.
    pub fn federation_for(&self, setup: &SetupSpec) -> FederationConfig {
        let mut cfg = self.federation.clone();
        cfg.strategy = setup.strategy;
        if let Some(p) = &setup.penalty {
            cfg.penalty = *p;
        } else {
            cfg.penalty = PenaltyConfig::default();
        }
        cfg.rose = setup.rose;
        if let Some(steps) = setup.personalization_steps {
            cfg.personalization_steps = steps;
        }
        cfg.seed = self.seed;
        cfg
    }

    /// Setups to run: the configured list, or the bare federation as a
    /// single arm named after its strategy.
    pub fn effective_setups(&self) -> Vec<SetupSpec> {
        if !self.setups.is_empty() {
            return self.setups.clone();
        }
        vec![SetupSpec {
            name: format!("{:?}", self.federation.strategy).to_lowercase(),
            strategy: self.federation.strategy,
            penalty: Some(self.federation.penalty),
            rose: self.federation.rose,
            personalization_steps: Some(self.federation.personalization_steps),
        }]
    }

    /// Stable hash of the effective (parsed) configuration.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", crate::fed::fnv1a(canonical.as_bytes()))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::eight_group_spec;
    use crate::model::ModelKind;

    pub(crate) fn synthetic_config(n: usize, clients: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            dataset: DatasetSource::Synthetic { spec: eight_group_spec(n, seed) },
            partition: PartitionSpec {
                client_count: clients,
                mode: PartitionMode::Homogeneous,
            },
            split_ratios: (0.7, 0.1, 0.2),
            federation: FederationConfig {
                strategy: Strategy::FedAvg,
                clients,
                rounds: 2,
                local_epochs: vec![2],
                batch_size: 64,
                lr: 0.1,
                penalty: PenaltyConfig::default(),
                rose: None,
                personalization_steps: 1,
                model: ModelKind::Linear,
                hidden_units: 100,
                seed,
            },
            setups: vec![
                SetupSpec {
                    name: "fedavg".into(),
                    strategy: Strategy::FedAvg,
                    penalty: None,
                    rose: None,
                    personalization_steps: None,
                },
                SetupSpec {
                    name: "fedida-fedavg".into(),
                    strategy: Strategy::FedAvg,
                    penalty: Some(PenaltyConfig {
                        mode: crate::penalty::PenaltyMode::AbsolutePair,
                        lambda: 0.05,
                        gamma: 0.01,
                    }),
                    rose: Some(RoseConfig::default()),
                    personalization_steps: None,
                },
            ],
            evaluation: EvalSpec {
                threshold: 0.5,
                min_group_size: 3,
                bootstrap_replicates: 12,
                metric_mode: MetricMode::Hard,
            },
            tuner: None,
            variance_study: Some(VarianceSpec {
                baseline_setup: "fedavg".into(),
                fedida_setup: "fedida-fedavg".into(),
                stratified: true,
                per_group: None,
                metric_mode: MetricMode::Soft,
            }),
            ablation: None,
            output_dir: None,
        }
    }

    #[test]
    fn valid_config_round_trips() {
        let cfg = synthetic_config(500, 3, 1);
        cfg.validate().unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(cfg.content_hash(), back.content_hash());
    }

    #[test]
    fn client_count_mismatch_rejected() {
        let mut cfg = synthetic_config(500, 3, 1);
        cfg.partition.client_count = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn negative_lambda_rejected() {
        let mut cfg = synthetic_config(500, 3, 1);
        cfg.setups[1].penalty = Some(PenaltyConfig {
            mode: crate::penalty::PenaltyMode::AbsolutePair,
            lambda: -1.0,
            gamma: 0.0,
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_variance_setup_rejected() {
        let mut cfg = synthetic_config(500, 3, 1);
        cfg.variance_study.as_mut().unwrap().fedida_setup = "nope".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content_not_formatting() {
        let cfg = synthetic_config(500, 3, 1);
        let mut other = cfg.clone();
        assert_eq!(cfg.content_hash(), other.content_hash());
        other.seed = 2;
        assert_ne!(cfg.content_hash(), other.content_hash());
    }
}
