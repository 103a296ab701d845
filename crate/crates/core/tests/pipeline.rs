//! Integration tests over the real Adult data and engineered synthetic
//! fixtures: ingestion counts, partition structure, tuner behavior, and
//! end-to-end timing.

use fedida::data::{
    eight_group_spec, generate_synthetic, load_csv, partition, split_train_val_test,
    ColumnSchema, PartitionMode, PartitionPlan, SubgroupIndex,
};
use fedida::experiment::{cmd_ablation, cmd_run, ExperimentConfig};
use fedida::fed::{ClientData, FederationConfig, Strategy};
use fedida::model::ModelKind;
use fedida::penalty::PenaltyConfig;
use fedida::tune::{combine_lambda, search_lambda_local};
use std::path::PathBuf;
use std::time::Instant;

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn load_adult() -> fedida::data::TabularDataset {
    let schema = ColumnSchema::from_json_file(repo_path("data/adult_schema.json")).unwrap();
    load_csv(repo_path("data/adult.csv"), &schema).unwrap()
}

#[test]
fn adult_ingestion_counts() {
    let ds = load_adult();
    // 48,842 raw census rows; 3,620 carry missing cells
    assert_eq!(ds.n() + ds.dropped_rows, 48_842);
    assert_eq!(ds.n(), 45_222);
    assert_eq!(ds.dropped_rows, 3_620);
    // race x sex intersections
    let index = SubgroupIndex::build(&ds, false).unwrap();
    assert_eq!(index.k(), 10);
}

#[test]
fn adult_partition_matches_population_proportions() {
    let ds = load_adult();
    let index = SubgroupIndex::build(&ds, false).unwrap();
    let global: Vec<f64> =
        index.sizes().iter().map(|&m| m as f64 / ds.n() as f64).collect();
    // the dominant intersection is a stable anchor of the dataset
    let white_male = index
        .keys()
        .iter()
        .position(|k| k.sensitive == vec![4, 1])
        .expect("white+male group present");
    assert!((global[white_male] - 0.599).abs() < 0.01, "{}", global[white_male]);

    let plan = PartitionPlan { client_count: 5, mode: PartitionMode::Homogeneous, seed: 3 };
    let clients = partition(&ds, &plan).unwrap();
    for client in &clients {
        let idx = SubgroupIndex::build(client, false).unwrap();
        for (key, size) in idx.keys().iter().zip(idx.sizes()) {
            let g = index.keys().iter().position(|k| k == key).unwrap();
            let prop = size as f64 / client.n() as f64;
            assert!(
                (prop - global[g]).abs() < 0.012,
                "client proportion {prop} vs global {} for {key}",
                global[g]
            );
        }
    }
}

#[test]
fn partition_and_split_preserve_row_multiset() {
    let ds = generate_synthetic(&eight_group_spec(1507, 8)).unwrap();
    let plan = PartitionPlan { client_count: 4, mode: PartitionMode::Homogeneous, seed: 8 };
    let clients = partition(&ds, &plan).unwrap();
    let mut ids: Vec<u64> = Vec::new();
    for client in &clients {
        let (tr, va, te) = split_train_val_test(client, (0.7, 0.1, 0.2), 9).unwrap();
        ids.extend(&tr.row_ids);
        ids.extend(&va.row_ids);
        ids.extend(&te.row_ids);
    }
    ids.sort_unstable();
    assert_eq!(ids, (0..1507u64).collect::<Vec<_>>());
}

#[test]
fn subgroup_index_stable_under_shuffle() {
    let ds = generate_synthetic(&eight_group_spec(900, 10)).unwrap();
    let index = SubgroupIndex::build(&ds, true).unwrap();
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.reverse();
    let shuffled = ds.select_rows(&order);
    let reindex = SubgroupIndex::build(&shuffled, true).unwrap();
    assert_eq!(index.keys(), reindex.keys());
    assert_eq!(index.sizes(), reindex.sizes());
}

#[test]
fn jsonl_snapshot_round_trips_rows() {
    let ds = generate_synthetic(&eight_group_spec(120, 11)).unwrap();
    let mut buffer = Vec::new();
    ds.write_jsonl(&mut buffer).unwrap();
    let text = String::from_utf8(buffer).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 120);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(first["a"].is_array());
    assert!(first["y"].is_number());
}

#[test]
fn lambda_search_rejects_collapsing_penalties() {
    // engineered margin: strongly separable synthetic data where a large
    // penalty provably flattens the scores
    let mut spec = eight_group_spec(1500, 12);
    spec.coefficients = vec![3.0, -2.5, 2.0];
    let ds = generate_synthetic(&spec).unwrap();
    let (mut train, mut val, mut test) = split_train_val_test(&ds, (0.7, 0.1, 0.2), 12).unwrap();
    let stats = train.standardize_fit();
    train.standardize_apply(&stats);
    val.standardize_apply(&stats);
    test.standardize_apply(&stats);
    let client = ClientData { train, val, test };
    let base = FederationConfig {
        strategy: Strategy::FedAvg,
        clients: 1,
        rounds: 1,
        local_epochs: vec![3],
        batch_size: 64,
        lr: 0.1,
        penalty: PenaltyConfig::default(),
        rose: None,
        personalization_steps: 0,
        model: ModelKind::Linear,
        hidden_units: 100,
        seed: 12,
    };
    let cfg = fedida::tune::LambdaSearchConfig {
        grid: vec![0.0, 0.5, 1.0, 2.0, 4.0],
        degradation_factor: 0.995,
        user_count: 4,
        epochs_per_candidate: 3,
    };
    let best = search_lambda_local(&client, &base, &cfg, 0).unwrap();
    assert!(best < 2.0, "collapse point not detected, got {best}");
    let combined = combine_lambda(&[best.max(0.1), 0.4], 4).unwrap();
    assert_eq!(combined.len(), 4);
    assert!((combined.last().unwrap() - 0.1_f64.max(best).min(0.4)).abs() < 1e-12);
}

#[test]
fn ablation_direction_on_engineered_bias() {
    // strong group-dependent outcome shifts; the penalty compresses
    // cross-group score gaps, so the soft parity gap must shrink
    let text = std::fs::read_to_string(repo_path("configs/synthetic_smoke.json")).unwrap();
    let mut raw: serde_json::Value = serde_json::from_str(&text).unwrap();
    raw["dataset"]["spec"]["n"] = 3000.into();
    raw["evaluation"]["metric_mode"] = "soft".into();
    raw["evaluation"]["min_group_size"] = 1.into();
    raw["ablation"] = serde_json::json!({"lambdas": [0.5], "gamma": 0.0});
    let cfg: ExperimentConfig = serde_json::from_value(raw).unwrap();
    cfg.validate().unwrap();
    let report = cmd_ablation(&cfg).unwrap();
    let baseline = report.rows.iter().find(|r| r.variant == "baseline").unwrap();
    let fairness =
        report.rows.iter().find(|r| r.variant == "fairness-only" && r.lambda == 0.5).unwrap();
    assert!(
        fairness.dpd <= baseline.dpd,
        "fairness-only dpd {} vs baseline {}",
        fairness.dpd,
        baseline.dpd
    );
}

#[test]
fn smoke_config_completes_quickly() {
    let cfg =
        ExperimentConfig::from_json_file(repo_path("configs/synthetic_smoke.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let artifacts = cmd_run(&cfg, dir.path()).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "smoke run took {elapsed:?}");
    assert_eq!(artifacts.table.rows.len(), 2);
}

#[test]
fn fcnn_trains_on_synthetic_federation() {
    let text = std::fs::read_to_string(repo_path("configs/synthetic_smoke.json")).unwrap();
    let mut raw: serde_json::Value = serde_json::from_str(&text).unwrap();
    raw["federation"]["model"] = "fcnn".into();
    raw["federation"]["hidden_units"] = 16.into();
    raw["federation"]["rounds"] = 2.into();
    raw["dataset"]["spec"]["n"] = 1200.into();
    let cfg: ExperimentConfig = serde_json::from_value(raw).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let artifacts = cmd_run(&cfg, dir.path()).unwrap();
    for row in &artifacts.table.rows {
        assert_eq!(row.model, "fcnn");
        assert!(row.auroc_mean > 0.5, "fcnn failed to learn: {}", row.auroc_mean);
    }
}
