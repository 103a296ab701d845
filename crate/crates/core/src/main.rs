use clap::{Parser, Subcommand};
use fedida::error::Error;
use fedida::experiment::{
    cmd_ablation, cmd_run, cmd_variance_study, render_table, ExperimentConfig, ResultsTable,
};
use fedida::fed::ClientData;
use fedida::tune::{combine_lambda, fedida_full, search_lambda_local};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fedida",
    about = "Fairness-aware federated learning experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config's output directory (FEDIDA_OUTPUT_DIR also works).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print progress detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured setup end to end and write artifacts.
    Run { config: PathBuf },
    /// Per-client penalty-strength search and the combined candidate list.
    TuneLambda { config: PathBuf },
    /// Two-stage L2-weight search with a final training run.
    TuneGamma { config: PathBuf },
    /// Bootstrap variance comparison between two configured setups.
    VarianceStudy {
        config: PathBuf,
        /// Bootstrap replicate count (defaults to evaluation.bootstrap_replicates).
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Penalty / oversampling component ablation.
    Ablation { config: PathBuf },
    /// Pretty-print the results table stored in an output directory.
    Report { dir: PathBuf },
}

fn resolve_output_dir(cli_dir: &Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(d) = cli_dir {
        return d.clone();
    }
    if let Some(d) = &cfg.output_dir {
        return d.clone();
    }
    if let Ok(d) = std::env::var("FEDIDA_OUTPUT_DIR") {
        return PathBuf::from(d);
    }
    PathBuf::from("fedida-out")
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_json_file(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.federation.seed = s;
    }
    Ok(cfg)
}

fn client_names(clients: &[ClientData]) -> String {
    clients
        .iter()
        .enumerate()
        .map(|(i, c)| format!("client {i}: {} train rows", c.train.n()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(config, cli.seed)?;
            let out = resolve_output_dir(&cli.output_dir, &cfg);
            let artifacts = cmd_run(&cfg, &out)?;
            if cli.verbose > 0 {
                eprintln!("wrote artifacts to {}", artifacts.output_dir.display());
            }
            print!("{}", render_table(&artifacts.table));
            Ok(())
        }
        Command::TuneLambda { config } => {
            let cfg = load_config(config, cli.seed)?;
            let tuner = cfg
                .tuner
                .clone()
                .ok_or_else(|| Error::config("config lacks a tuner section"))?;
            let clients = fedida::experiment::prepare_clients(&cfg)?;
            if cli.verbose > 0 {
                eprintln!("{}", client_names(&clients));
            }
            let per_client: Result<Vec<f64>, Error> = clients
                .iter()
                .enumerate()
                .map(|(c, data)| search_lambda_local(data, &cfg.federation, &tuner.lambda, c))
                .collect();
            let per_client = per_client?;
            let combined = combine_lambda(&per_client, tuner.lambda.user_count)?;
            let report = serde_json::json!({
                "per_client": per_client,
                "candidates": combined,
            });
            let out = resolve_output_dir(&cli.output_dir, &cfg);
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("lambda_search.json"), serde_json::to_string_pretty(&report)?)?;
            println!("{report}");
            Ok(())
        }
        Command::TuneGamma { config } => {
            let cfg = load_config(config, cli.seed)?;
            let tuner = cfg
                .tuner
                .clone()
                .ok_or_else(|| Error::config("config lacks a tuner section"))?;
            let clients = fedida::experiment::prepare_clients(&cfg)?;
            let lambda = tuner.gamma_lambda.unwrap_or(cfg.federation.penalty.lambda);
            let (result, _outcome) = fedida_full(
                &clients,
                &cfg.federation,
                lambda,
                tuner.gamma_range,
                tuner.gamma_m,
                tuner.gamma_m_prime,
                &cfg.evaluation.metric_config(),
            )?;
            let out = resolve_output_dir(&cli.output_dir, &cfg);
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("gamma_search.json"),
                serde_json::to_string_pretty(&result)?,
            )?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
        Command::VarianceStudy { config, replicates } => {
            let cfg = load_config(config, cli.seed)?;
            let t_b = replicates.unwrap_or(cfg.evaluation.bootstrap_replicates);
            let report = cmd_variance_study(&cfg, t_b)?;
            let out = resolve_output_dir(&cli.output_dir, &cfg);
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("variance_report.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Ablation { config } => {
            let cfg = load_config(config, cli.seed)?;
            let report = cmd_ablation(&cfg)?;
            let out = resolve_output_dir(&cli.output_dir, &cfg);
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("ablation_report.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Report { dir } => {
            let path = dir.join("results.json");
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
            let table: ResultsTable = serde_json::from_str(&text)?;
            print!("{}", render_table(&table));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Schema(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
