//! End-to-end tests of the command line binary: exit codes, output files,
//! and the text/CSV/JSON it prints.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use filt_snn::config::DATA_DIR_ENV;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_filt-snn"));
    cmd.env(DATA_DIR_ENV, data_dir());
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small run: 16 hidden neurons, 4 batches of 10, subsets of the fixture.
fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    let text = r#"{
        "topology": [784, 16, 10],
        "train": {"batches": 4, "batch_size": 10, "seed": 7},
        "data": {"train_subset": 120, "test_subset": 60},
        "eval_every": 2
    }"#;
    std::fs::write(&path, text).unwrap();
    path
}

fn parse_metric(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{text}"))
}

/// Rows of a two-column-keyed series CSV as (x, series, value) triples.
fn parse_series(text: &str) -> Vec<(f64, String, f64)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,series,value"));
    lines
        .map(|l| {
            let mut parts = l.splitn(3, ',');
            let x = parts.next().unwrap().parse().unwrap();
            let series = parts.next().unwrap().to_string();
            let value = parts.next().unwrap().parse().unwrap();
            (x, series, value)
        })
        .collect()
}

#[test]
fn help_and_version_exit_zero() {
    let commands: &[&[&str]] = &[
        &["--help"],
        &["--version"],
        &["train", "--help"],
        &["eval", "--help"],
        &["encode", "--help"],
        &["analyze", "--help"],
        &["analyze", "delta-u", "--help"],
        &["analyze", "te-sweep", "--help"],
        &["analyze", "converge", "--help"],
        &["analyze", "two-train", "--help"],
        &["sweep", "--help"],
    ];
    for args in commands {
        let out = run(args);
        assert!(out.status.success(), "{args:?} exited {:?}", out.status.code());
        assert!(!out.stdout.is_empty(), "{args:?} printed nothing");
    }
}

#[test]
fn usage_errors_exit_one() {
    let cases: &[&[&str]] = &[
        &["train", "--no-such-flag"],
        &["analyze", "delta-u"],
        &["encode"],
        &["eval", "--checkpoint", "x", "--set", "neither"],
        &["sweep", "--axis", "eta"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"no_such_field": 1}"#).unwrap();
    let out = run(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no_such_field"));

    let missing = dir.path().join("absent.json");
    let out = run(&["train", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_writes_artifacts_and_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("run");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr:\n{}", stderr(&out));

    let text = stdout(&out);
    let acc = parse_metric(&text, "test_accuracy");
    let abstain = parse_metric(&text, "abstain_rate");
    assert!((0.0..=1.0).contains(&acc));
    assert!((0.0..=1.0).contains(&abstain));

    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("config.json")).unwrap())
            .unwrap();
    assert_eq!(saved["train"]["batches"], 4);
    assert_eq!(saved["topology"][1], 16);

    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next(),
        Some("batch,train_acc,test_acc,abstain_rate,mean_hidden_spikes,mean_output_spikes,wall_ms")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5, "initial row plus one per batch");
    assert!(rows[0].starts_with("0,"));
    let last: Vec<&str> = rows[4].split(',').collect();
    assert_eq!(last[0], "4");
    assert!(!last[2].is_empty(), "final row evaluates test accuracy");

    assert!(!std::fs::read(out_dir.join("checkpoint.bin")).unwrap().is_empty());
}

#[test]
fn train_rerun_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let outputs: Vec<PathBuf> =
        (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for out_dir in &outputs {
        let out = run(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    }

    let checkpoint_a = std::fs::read(outputs[0].join("checkpoint.bin")).unwrap();
    let checkpoint_b = std::fs::read(outputs[1].join("checkpoint.bin")).unwrap();
    assert_eq!(checkpoint_a, checkpoint_b);

    // Identical up to the wall clock column.
    let strip = |path: &Path| {
        std::fs::read_to_string(path.join("metrics.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&outputs[0]), strip(&outputs[1]));
}

#[test]
fn eval_reads_back_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("run");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let trained_acc = parse_metric(&stdout(&out), "test_accuracy");

    let checkpoint = out_dir.join("checkpoint.bin");
    let out = run(&[
        "eval",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    let eval_acc = parse_metric(&stdout(&out), "accuracy");
    assert_eq!(eval_acc, trained_acc);

    let out = run(&[
        "eval",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "train",
    ]);
    assert!(out.status.success());
}

#[test]
fn eval_checkpoint_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.bin");
    let out = run(&["eval", "--checkpoint", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let out = run(&["eval", "--checkpoint", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = bin()
        .env(DATA_DIR_ENV, dir.path())
        .args(["train", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr:\n{}", stderr(&out));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let collision = dir.path().join("taken");
    std::fs::write(&collision, b"").unwrap();
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        collision.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr:\n{}", stderr(&out));
}

#[test]
fn encode_json_lists_all_channels() {
    let out = run(&["encode", "--index", "0", "--json"]);
    assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let label = doc["label"].as_u64().unwrap();
    assert!(label < 10);
    let times = doc["spike_times"].as_array().unwrap();
    assert_eq!(times.len(), 784);
    let mut spiking = 0;
    for t in times {
        if let Some(t) = t.as_f64() {
            assert!((0.0..4.0).contains(&t));
            spiking += 1;
        } else {
            assert!(t.is_null());
        }
    }
    assert!(spiking > 0, "a digit image has bright pixels");
}

#[test]
fn encode_text_lists_spiking_channels_only() {
    let out = run(&["encode", "--index", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("label "));
    for line in lines {
        let (ch, t) = line.split_once(' ').unwrap();
        assert!(ch.parse::<usize>().unwrap() < 784);
        let t: f64 = t.parse().unwrap();
        assert!((0.0..4.0).contains(&t));
    }
}

#[test]
fn encode_index_out_of_range_exits_one() {
    let out = run(&["encode", "--index", "99999999"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_delta_u_prints_series_and_equilibrium() {
    let out = run(&["analyze", "delta-u", "--inputs", "0,2", "--step", "0.5"]);
    assert!(out.status.success());
    let points = parse_series(&stdout(&out));
    assert!(points.iter().any(|(_, s, _)| s == "total"));
    assert!(points.iter().any(|(_, s, _)| s == "input_0"));
    assert!(points.iter().any(|(_, s, _)| s == "input_1"));
    assert!(stderr(&out).contains("t_e 4.09196"));
}

#[test]
fn analyze_te_sweep_is_nondecreasing() {
    let out = run(&["analyze", "te-sweep", "--inputs", "0", "--shifts", "0.1,0.5,1.0"]);
    assert!(out.status.success());
    let points = parse_series(&stdout(&out));
    let values: Vec<f64> =
        points.iter().filter(|(_, s, _)| s == "t_e").map(|&(_, _, v)| v).collect();
    assert_eq!(values.len(), 3);
    assert!((values[0] - 2.9269).abs() < 1e-3);
    assert!((values[1] - 3.1299).abs() < 1e-3);
    assert!((values[2] - 3.3893).abs() < 1e-3);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn analyze_converge_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("converge.csv");
    let out = run(&[
        "analyze",
        "converge",
        "--inputs",
        "0,2",
        "--weights",
        "15,15",
        "--iterations",
        "50",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    let points = parse_series(&std::fs::read_to_string(&path).unwrap());
    assert!(points.iter().any(|(_, s, _)| s == "spike_time"));
    assert!(points.iter().any(|(_, s, _)| s == "t_e"));
}

#[test]
fn analyze_two_train_labels_both_patterns() {
    let out = run(&[
        "analyze",
        "two-train",
        "--pattern-a",
        "0,2",
        "--pattern-b",
        "0,1",
        "--weights",
        "12,12",
        "--iterations",
        "40",
    ]);
    assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    let points = parse_series(&stdout(&out));
    assert!(points.iter().any(|(_, s, _)| s == "pattern_0"));
    assert!(points.iter().any(|(_, s, _)| s == "pattern_1"));
    assert!(points.iter().any(|(_, s, _)| s == "t_e_0"));
    assert!(points.iter().any(|(_, s, _)| s == "t_e_1"));
}

#[test]
fn sweep_aggregates_seeds_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{
            "topology": [784, 8, 10],
            "train": {"batches": 2, "batch_size": 10},
            "data": {"train_subset": 60, "test_subset": 40},
            "eval_every": 2
        }"#,
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "eta",
        "--values",
        "0.005,0.01",
        "--seeds",
        "1,2",
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    let points = parse_series(&stdout(&out));
    assert_eq!(points.len(), 6, "two seed rows and a mean row per value");
    for &value in &[0.005, 0.01] {
        let seeds: Vec<f64> = points
            .iter()
            .filter(|&&(x, ref s, _)| x == value && s.starts_with("seed_"))
            .map(|&(_, _, v)| v)
            .collect();
        let mean = points
            .iter()
            .find(|&&(x, ref s, _)| x == value && s == "mean")
            .map(|&(_, _, v)| v)
            .unwrap();
        assert_eq!(seeds.len(), 2);
        assert!((mean - (seeds[0] + seeds[1]) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn sweep_rejects_bad_arguments() {
    let out = run(&["sweep", "--axis", "hidden", "--values", "12.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["sweep", "--axis", "eta", "--values", "0.01", "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(1));
}
