use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tabsynth::privacy::{DpVariant, PrivacySpec};
use tabsynth::Error;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tabsynth"));
    c.env_remove("TABSYNTH_OUT");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Writes a small bimodal table, its schema and a run config into `dir`.
fn fixture(dir: &Path, epochs: usize) -> PathBuf {
    let schema = json!({
        "target": "y",
        "columns": [
            {"name": "x", "kind": "continuous"},
            {"name": "m", "kind": "mixed", "mixed_categorical_points": [0.0]},
            {"name": "k", "kind": "categorical", "categorical_values": ["a", "b", "c"]},
            {"name": "y", "kind": "categorical", "categorical_values": ["no", "yes"], "is_target": true}
        ]
    });
    std::fs::write(dir.join("schema.json"), schema.to_string()).unwrap();
    let mut csv = String::from("x,m,k,y\n");
    for i in 0..120 {
        let f = i as f64;
        let x = if i % 2 == 0 { -3.0 } else { 3.0 } + (f * 0.37).sin() * 0.4;
        let m = if i % 3 == 0 { 0.0 } else { 40.0 + (f * 1.3).cos() * 5.0 };
        let k = ["a", "b", "c"][i % 3];
        let y = if i % 5 == 0 { "yes" } else { "no" };
        csv.push_str(&format!("{x},{m},{k},{y}\n"));
    }
    std::fs::write(dir.join("data.csv"), csv).unwrap();
    let cfg = json!({
        "schema": "schema.json",
        "data": "data.csv",
        "seed": 5,
        "train": {"epochs": epochs, "batch_size": 40, "hidden": 32, "latent_dim": 16}
    });
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn fit_reports_layout_and_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path(), 1);
    let a = run(d.path(), &["fit", "-c", "run.json", "--out", "a"]);
    assert!(a.status.success(), "{a:?}");
    let line = stdout(&a);
    assert!(line.starts_with("T=") && line.contains(" E=") && line.contains(" d="), "{line}");
    let b = run(d.path(), &["fit", "-c", "run.json", "--out", "b"]);
    assert!(b.status.success());
    let side_a = std::fs::read(d.path().join("a/encoder.json")).unwrap();
    let side_b = std::fs::read(d.path().join("b/encoder.json")).unwrap();
    assert_eq!(side_a, side_b);
    let layout = read_json(d.path().join("a/layout.json"));
    assert_eq!(layout["schema_version"], 1);
    assert_eq!(layout["seed"], 5);
    assert_eq!(layout["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(layout["report"]["columns"].as_array().unwrap().len(), 4);
    assert_eq!(
        std::fs::read(d.path().join("a/layout.json")).unwrap(),
        std::fs::read(d.path().join("b/layout.json")).unwrap()
    );
}

#[test]
fn fit_loan_shaped_schema_lists_every_column() {
    let d = tempfile::tempdir().unwrap();
    let mut columns = Vec::new();
    let mut header = Vec::new();
    for i in 0..5 {
        columns.push(json!({"name": format!("c{i}"), "kind": "continuous"}));
        header.push(format!("c{i}"));
    }
    for i in 0..5 {
        let mut c = json!({"name": format!("b{i}"), "kind": "categorical", "categorical_values": ["0", "1"]});
        if i == 4 {
            c["is_target"] = json!(true);
        }
        columns.push(c);
        header.push(format!("b{i}"));
    }
    for i in 0..2 {
        columns.push(json!({"name": format!("k{i}"), "kind": "categorical", "categorical_values": ["p", "q", "r", "s"]}));
        header.push(format!("k{i}"));
    }
    columns.push(json!({"name": "mortgage", "kind": "mixed", "mixed_categorical_points": [0.0]}));
    header.push("mortgage".into());
    std::fs::write(
        d.path().join("schema.json"),
        json!({"target": "b4", "columns": columns}).to_string(),
    )
    .unwrap();
    let mut csv = header.join(",") + "\n";
    for r in 0..200 {
        let f = r as f64;
        let mut row: Vec<String> = (0..5).map(|c| format!("{}", (f * (c + 1) as f64).sin() * 10.0)).collect();
        row.extend((0..5).map(|c| ((r + c) % 2).to_string()));
        row.extend((0..2).map(|c| ["p", "q", "r", "s"][(r + c) % 4].to_string()));
        row.push(if r % 3 == 0 { "0".into() } else { format!("{}", 100.0 + f) });
        csv += &(row.join(",") + "\n");
    }
    std::fs::write(d.path().join("loan.csv"), csv).unwrap();
    let o = run(
        d.path(),
        &["fit", "--schema", "schema.json", "--data", "loan.csv", "--seed", "0", "--out", "o"],
    );
    assert!(o.status.success(), "{o:?}");
    let layout = read_json(d.path().join("o/layout.json"));
    let cols = layout["report"]["columns"].as_array().unwrap();
    assert_eq!(cols.len(), 13);
    let kinds = |k: &str| cols.iter().filter(|c| c["kind"] == k).count();
    assert_eq!((kinds("continuous"), kinds("categorical"), kinds("mixed")), (5, 7, 1));
    let binary = cols
        .iter()
        .filter(|c| c["span"]["kind"] == "categorical" && c["span"]["gamma_len"] == 2)
        .count();
    assert_eq!(binary, 5);
}

#[test]
fn config_errors_exit_with_code_two() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path(), 1);
    let missing = run(d.path(), &["fit", "--schema", "nope.json", "--data", "data.csv", "--seed", "1"]);
    assert_eq!(missing.status.code(), Some(2));
    let no_seed = run(d.path(), &["fit", "--schema", "schema.json", "--data", "data.csv"]);
    assert_eq!(no_seed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("seed"));
    let bad_flag = run(d.path(), &["fit", "--bogus"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    let bad_cond = run(d.path(), &["sample", "--seed", "1", "--n", "3", "--model", "missing.json"]);
    assert_eq!(bad_cond.status.code(), Some(2));
}

#[test]
fn account_matches_library_planner() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &["account", "--sigma", "20", "--batch", "10", "--n", "500", "--delta", "1e-5", "--epsilon", "1", "--variant", "d_dp", "--out", "o"],
    );
    assert!(o.status.success(), "{o:?}");
    let mut spec = PrivacySpec::new(DpVariant::DDp, 20.0, 10);
    spec.epsilon = Some(1.0);
    spec.n_rows = Some(500);
    let t = spec.plan_iterations().unwrap();
    assert!(stdout(&o).starts_with(&format!("T={t} ")), "{}", stdout(&o));
    let rep = read_json(d.path().join("o/account.json"));
    assert_eq!(rep["report"]["privacy"]["iterations"], t);
    assert_eq!(rep["report"]["planned"], true);

    let fixed = run(
        d.path(),
        &["account", "--sigma", "20", "--batch", "10", "--n", "500", "--iterations", "10", "--out", "o"],
    );
    assert!(fixed.status.success());
    let rep = read_json(d.path().join("o/account.json"));
    let want = spec.report(10).unwrap().epsilon;
    assert_eq!(rep["report"]["privacy"]["epsilon"].as_f64().unwrap(), want);
}

#[test]
fn account_reference_budget_is_a_runtime_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &["account", "--sigma", "1.06", "--batch", "64", "--n", "39000", "--delta", "1e-5", "--epsilon", "1", "--variant", "d_dp", "--out", "o"],
    );
    let mut spec = PrivacySpec::new(DpVariant::DDp, 1.06, 64);
    spec.epsilon = Some(1.0);
    spec.n_rows = Some(39_000);
    assert!(matches!(spec.plan_iterations(), Err(Error::BudgetTooSmall)));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn train_sample_evaluate_pipeline_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path(), 2);
    for out in ["r1", "r2"] {
        let t = run(d.path(), &["train", "-c", "run.json", "--out", out]);
        assert!(t.status.success(), "{t:?}");
        let s = run(d.path(), &["sample", "-c", "run.json", "--out", out, "--n", "50"]);
        assert!(s.status.success(), "{s:?}");
    }
    for f in ["model.json", "train_report.json", "synthetic.csv", "losses.csv"] {
        assert_eq!(
            std::fs::read(d.path().join("r1").join(f)).unwrap(),
            std::fs::read(d.path().join("r2").join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }
    let rep = read_json(d.path().join("r1/train_report.json"));
    assert_eq!(rep["report"]["epochs_run"], 2);
    assert_eq!(rep["command"], "train");

    let ev = run(d.path(), &["evaluate", "-c", "run.json", "--out", "r1"]);
    assert!(ev.status.success(), "{ev:?}");
    let ev = read_json(d.path().join("r1/evaluation.json"));
    assert_eq!(ev["report"]["n_synthetic"], 50);
    assert!(ev["report"]["distance"]["real_synth"]["dcr"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sample_zero_rows_writes_header_only() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path(), 1);
    assert!(run(d.path(), &["train", "-c", "run.json", "--out", "o"]).status.success());
    let s = run(d.path(), &["sample", "-c", "run.json", "--out", "o", "--n", "0"]);
    assert!(s.status.success());
    assert_eq!(std::fs::read_to_string(d.path().join("o/synthetic.csv")).unwrap(), "x,m,k,y\n");
    let c = run(
        d.path(),
        &["sample", "-c", "run.json", "--out", "o", "--n", "5", "--condition", "y=maybe"],
    );
    assert_eq!(c.status.code(), Some(2));
}

#[test]
fn evaluate_identical_tables_scores_zero() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path(), 1);
    let o = run(d.path(), &["evaluate", "-c", "run.json", "--out", "o", "--synthetic", "data.csv"]);
    assert!(o.status.success(), "{o:?}");
    let ev = read_json(d.path().join("o/evaluation.json"));
    assert_eq!(ev["report"]["similarity"]["avg_jsd"], 0.0);
    assert_eq!(ev["report"]["similarity"]["avg_wd"], 0.0);
    assert_eq!(ev["report"]["distance"]["real_synth"]["dcr"], 0.0);
}

#[test]
fn output_dir_defaults_to_environment() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path(), 1);
    let o = bin()
        .current_dir(d.path())
        .env("TABSYNTH_OUT", "from_env")
        .args(["fit", "-c", "run.json"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(d.path().join("from_env/encoder.json").exists());
}

#[test]
fn train_dp_and_noise_attack_write_reports() {
    let d = tempfile::tempdir().unwrap();
    fixture(d.path(), 1);
    let o = run(
        d.path(),
        &["train-dp", "-c", "run.json", "--out", "o", "--sigma", "20", "--batch", "10", "--epsilon", "1"],
    );
    assert!(o.status.success(), "{o:?}");
    let rep = read_json(d.path().join("o/privacy_report.json"));
    assert!(rep["report"]["privacy"]["epsilon"].as_f64().unwrap() <= 1.0);
    assert_eq!(rep["report"]["privacy"]["variant"], "d_dp");

    let budget = run(
        d.path(),
        &["train-dp", "-c", "run.json", "--out", "o", "--sigma", "0.5", "--batch", "10", "--epsilon", "1"],
    );
    assert_eq!(budget.status.code(), Some(3));

    let cfg = json!({
        "schema": "schema.json",
        "data": "data.csv",
        "seed": 2,
        "attack": {
            "kind": "membership",
            "generator": "noise",
            "reference_rows": 100,
            "targets": 2,
            "membership": {"batches": 120, "batch_rows": 20, "train_size": 80, "test_size": 40,
                           "forest": {"n_trees": 5, "max_depth": 5, "max_features": null, "seed": 0}}
        }
    });
    std::fs::write(d.path().join("attack.json"), cfg.to_string()).unwrap();
    let a = run(d.path(), &["attack", "-c", "attack.json", "--out", "o"]);
    assert!(a.status.success(), "{a:?}");
    let rep = read_json(d.path().join("o/attack.json"));
    assert_eq!(rep["report"]["attack"]["repetitions"].as_array().unwrap().len(), 2);
    assert_eq!(rep["report"]["attack"]["p_real"], 1.0);
}
