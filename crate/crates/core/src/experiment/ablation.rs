//! Component ablation: the cross of {no penalty, each lambda} x
//! {oversampling off, on}, reported as one table.

use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, SetupSpec};
use crate::experiment::runner::{mean_sd, prepare_clients, run_setup};
use crate::penalty::{PenaltyConfig, PenaltyMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub lambda: f64,
    pub oversampling: bool,
    pub auroc: f64,
    pub dpd: f64,
    pub dpr: f64,
    pub dfpr: f64,
    pub dppv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// Build the setup list an ablation config expands to.
pub fn ablation_setups(cfg: &ExperimentConfig) -> Result<Vec<(String, SetupSpec)>> {
    let spec = cfg
        .ablation
        .as_ref()
        .ok_or_else(|| Error::config("config lacks an ablation section"))?;
    let strategy = cfg.federation.strategy;
    let rose = spec.rose.unwrap_or_default();
    let pen = |lambda: f64| PenaltyConfig {
        mode: PenaltyMode::AbsolutePair,
        lambda,
        gamma: spec.gamma,
    };
    let mut out = Vec::new();
    out.push((
        "baseline".to_string(),
        SetupSpec {
            name: "baseline".into(),
            strategy,
            penalty: None,
            rose: None,
            personalization_steps: None,
        },
    ));
    for &lambda in &spec.lambdas {
        out.push((
            "fairness-only".to_string(),
            SetupSpec {
                name: format!("fairness-only-{lambda}"),
                strategy,
                penalty: Some(pen(lambda)),
                rose: None,
                personalization_steps: None,
            },
        ));
    }
    out.push((
        "oversampling-only".to_string(),
        SetupSpec {
            name: "oversampling-only".into(),
            strategy,
            penalty: None,
            rose: Some(rose),
            personalization_steps: None,
        },
    ));
    for &lambda in &spec.lambdas {
        out.push((
            "fedida".to_string(),
            SetupSpec {
                name: format!("fedida-{lambda}"),
                strategy,
                penalty: Some(pen(lambda)),
                rose: Some(rose),
                personalization_steps: None,
            },
        ));
    }
    Ok(out)
}

pub fn cmd_ablation(cfg: &ExperimentConfig) -> Result<AblationReport> {
    let clients = prepare_clients(cfg)?;
    let mut rows = Vec::new();
    for (variant, setup) in ablation_setups(cfg)? {
        let run = run_setup(cfg, &clients, &setup)?;
        let col = |f: fn(&crate::metrics::FairnessReport) -> f64| -> f64 {
            mean_sd(&run.reports.iter().map(|r| f(&r.report)).collect::<Vec<_>>()).0
        };
        rows.push(AblationRow {
            variant,
            lambda: setup.penalty.map_or(0.0, |p| p.lambda),
            oversampling: setup.rose.is_some(),
            auroc: col(|r| r.auroc),
            dpd: col(|r| r.dpd),
            dpr: col(|r| r.dpr),
            dfpr: col(|r| r.dfpr),
            dppv: col(|r| r.dppv),
        });
    }
    Ok(AblationReport { rows })
}
