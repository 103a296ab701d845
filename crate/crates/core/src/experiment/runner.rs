//! Pipeline execution: dataset assembly, setup runs, evaluation, and
//! artifact emission. Everything is keyed off the experiment seed; reruns
//! write byte-identical artifacts.

use crate::data::{
    generate_synthetic, load_csv, partition, split_train_val_test, ColumnSchema, PartitionPlan,
    SubgroupIndex, TabularDataset,
};
use crate::error::Result;
use crate::experiment::config::{DatasetSource, ExperimentConfig, SetupSpec};
use crate::fed::{run_federation, ClientData, FederationOutcome};
use crate::metrics::{evaluate, FairnessReport};
use crate::model::ModelParams;
use crate::rng::{derive_rng, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// One client's evaluation record with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientReport {
    pub setup: String,
    pub client: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub report: FairnessReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub setup: String,
    pub model: String,
    pub auroc_mean: f64,
    pub auroc_sd: f64,
    pub dpd_mean: f64,
    pub dpd_sd: f64,
    pub dpr_mean: f64,
    pub dpr_sd: f64,
    pub dfpr_mean: f64,
    pub dfpr_sd: f64,
    pub dppv_mean: f64,
    pub dppv_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

pub struct SetupRun {
    pub spec: SetupSpec,
    pub outcome: FederationOutcome,
    pub reports: Vec<ClientReport>,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Load or synthesize the dataset named by the config.
pub fn assemble_dataset(cfg: &ExperimentConfig) -> Result<TabularDataset> {
    match &cfg.dataset {
        DatasetSource::AdultCsv { path, schema_path } => {
            let schema = ColumnSchema::from_json_file(schema_path)?;
            load_csv(path, &schema)
        }
        DatasetSource::Synthetic { spec } => generate_synthetic(spec),
    }
}

/// Partition into clients, split each train/val/test, and freeze each
/// client's standardization on its training split.
pub fn prepare_clients(cfg: &ExperimentConfig) -> Result<Vec<ClientData>> {
    let ds = assemble_dataset(cfg)?;
    let plan = PartitionPlan {
        client_count: cfg.partition.client_count,
        mode: cfg.partition.mode.clone(),
        seed: derive_rng(cfg.seed, &[tag("partition")]).random(),
    };
    let parts = partition(&ds, &plan)?;
    let mut clients = Vec::with_capacity(parts.len());
    for (c, part) in parts.into_iter().enumerate() {
        let split_seed: u64 =
            derive_rng(cfg.seed, &[tag("split"), c as u64]).random();
        let (mut train, mut val, mut test) =
            split_train_val_test(&part, cfg.split_ratios, split_seed)?;
        let stats = train.standardize_fit();
        train.standardize_apply(&stats);
        val.standardize_apply(&stats);
        test.standardize_apply(&stats);
        clients.push(ClientData { train, val, test });
    }
    Ok(clients)
}

/// Train one setup and evaluate it on every client's test split.
pub fn run_setup(
    cfg: &ExperimentConfig,
    clients: &[ClientData],
    setup: &SetupSpec,
) -> Result<SetupRun> {
    let fed_cfg = cfg.federation_for(setup);
    let outcome = run_federation(clients, &fed_cfg)?;
    let metric_cfg = cfg.evaluation.metric_config();
    let mut reports = Vec::with_capacity(clients.len());
    for (c, data) in clients.iter().enumerate() {
        let params: &ModelParams = outcome.eval_params(c);
        let scores = params.forward(&data.test.a)?;
        let index = SubgroupIndex::build(&data.test, false)?;
        let report = evaluate(&scores.probs, &data.test.y, &index, &metric_cfg)?;
        reports.push(ClientReport { setup: setup.name.clone(), client: c, seed: cfg.seed, report });
    }
    Ok(SetupRun { spec: setup.clone(), outcome, reports })
}

pub fn table_from_runs(cfg: &ExperimentConfig, runs: &[SetupRun]) -> ResultsTable {
    let model = format!("{:?}", cfg.federation.model).to_lowercase();
    let rows = runs
        .iter()
        .map(|run| {
            let col = |f: fn(&FairnessReport) -> f64| -> Vec<f64> {
                run.reports.iter().map(|r| f(&r.report)).collect()
            };
            let (auroc_mean, auroc_sd) = mean_sd(&col(|r| r.auroc));
            let (dpd_mean, dpd_sd) = mean_sd(&col(|r| r.dpd));
            let (dpr_mean, dpr_sd) = mean_sd(&col(|r| r.dpr));
            let (dfpr_mean, dfpr_sd) = mean_sd(&col(|r| r.dfpr));
            let (dppv_mean, dppv_sd) = mean_sd(&col(|r| r.dppv));
            TableRow {
                setup: run.spec.name.clone(),
                model: model.clone(),
                auroc_mean,
                auroc_sd,
                dpd_mean,
                dpd_sd,
                dpr_mean,
                dpr_sd,
                dfpr_mean,
                dfpr_sd,
                dppv_mean,
                dppv_sd,
            }
        })
        .collect();
    ResultsTable { rows }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
}

pub struct RunArtifacts {
    pub table: ResultsTable,
    pub reports: Vec<ClientReport>,
    pub output_dir: PathBuf,
}

fn rfc4180_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_results_csv(table: &ResultsTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "setup,model,auroc_mean,auroc_sd,dpd_mean,dpd_sd,dpr_mean,dpr_sd,dfpr_mean,dfpr_sd,dppv_mean,dppv_sd\r\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\r\n",
            rfc4180_field(&r.setup),
            rfc4180_field(&r.model),
            r.auroc_mean,
            r.auroc_sd,
            r.dpd_mean,
            r.dpd_sd,
            r.dpr_mean,
            r.dpr_sd,
            r.dfpr_mean,
            r.dfpr_sd,
            r.dppv_mean,
            r.dppv_sd
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Long-format per-client metric CSV for external plotting.
pub fn write_plot_csv(reports: &[ClientReport], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("setup,client,metric,value\r\n");
    for r in reports {
        for (metric, value) in [
            ("auroc", r.report.auroc),
            ("dpd", r.report.dpd),
            ("dpr", r.report.dpr),
            ("dfpr", r.report.dfpr),
            ("dppv", r.report.dppv),
        ] {
            out.push_str(&format!(
                "{},{},{},{}\r\n",
                rfc4180_field(&r.setup),
                r.client,
                metric,
                value
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Execute every configured setup and write the artifact set:
/// results.{csv,json}, reports.jsonl, traces.jsonl, per-setup parameter
/// checkpoints, plot-ready long CSV, and a manifest tying them together.
pub fn cmd_run(cfg: &ExperimentConfig, output_dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(output_dir)?;
    let clients = prepare_clients(cfg)?;
    let setups = cfg.effective_setups();
    let mut runs = Vec::with_capacity(setups.len());
    for setup in &setups {
        runs.push(run_setup(cfg, &clients, setup)?);
    }
    let table = table_from_runs(cfg, &runs);
    let mut artifacts: Vec<String> = Vec::new();

    let results_json = output_dir.join("results.json");
    std::fs::write(&results_json, serde_json::to_string_pretty(&table)?)?;
    artifacts.push("results.json".into());

    let results_csv = output_dir.join("results.csv");
    write_results_csv(&table, &results_csv)?;
    artifacts.push("results.csv".into());

    let mut reports_file = std::fs::File::create(output_dir.join("reports.jsonl"))?;
    for run in &runs {
        for report in &run.reports {
            serde_json::to_writer(&mut reports_file, report)?;
            reports_file.write_all(b"\n")?;
        }
    }
    artifacts.push("reports.jsonl".into());

    let mut traces_file = std::fs::File::create(output_dir.join("traces.jsonl"))?;
    #[derive(Serialize)]
    struct TraceLine<'a> {
        setup: &'a str,
        #[serde(flatten)]
        trace: &'a crate::fed::RoundTrace,
    }
    for run in &runs {
        for trace in &run.outcome.traces {
            serde_json::to_writer(&mut traces_file, &TraceLine { setup: &run.spec.name, trace })?;
            traces_file.write_all(b"\n")?;
        }
    }
    artifacts.push("traces.jsonl".into());

    for run in &runs {
        let name = format!("params-{}.json", run.spec.name);
        std::fs::write(output_dir.join(&name), run.outcome.global.to_json())?;
        artifacts.push(name);
    }

    write_plot_csv(
        &runs.iter().flat_map(|r| r.reports.clone()).collect::<Vec<_>>(),
        &output_dir.join("metrics_long.csv"),
    )?;
    artifacts.push("metrics_long.csv".into());

    let manifest =
        Manifest { config_hash: cfg.content_hash(), seed: cfg.seed, artifacts };
    std::fs::write(output_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    Ok(RunArtifacts {
        table,
        reports: runs.into_iter().flat_map(|r| r.reports).collect(),
        output_dir: output_dir.to_path_buf(),
    })
}

/// Render a stored results table as aligned text.
pub fn render_table(table: &ResultsTable) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:<8} {:>14} {:>14} {:>14} {:>14} {:>14}\n",
        "setup", "model", "AUROC", "DPD", "DPR", "DFPR", "DPPV"
    ));
    for r in &table.rows {
        out.push_str(&format!(
            "{:<24} {:<8} {:>6.3} ({:.3}) {:>6.3} ({:.3}) {:>6.3} ({:.3}) {:>6.3} ({:.3}) {:>6.3} ({:.3})\n",
            r.setup,
            r.model,
            r.auroc_mean,
            r.auroc_sd,
            r.dpd_mean,
            r.dpd_sd,
            r.dpr_mean,
            r.dpr_sd,
            r.dfpr_mean,
            r.dfpr_sd,
            r.dppv_mean,
            r.dppv_sd
        ));
    }
    out
}
