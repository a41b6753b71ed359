use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adjoint_core::model::Checkpoint;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adjoint"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"
seed = 3

[synth]
days = 12

[data]
lookback = 8
horizon = 4

[model]
lstm_hidden = 4
lstm_layers = 1
main_hidden = [8]
ancillary_hidden = [4]

[training]
epochs_main = 2
epochs_ancillary = 2
epochs_combiner = 2
window_stride = 4

[eval]
mc_samples = 10
forecast_samples = 200
"#;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("run.toml");
        std::fs::write(&config, TINY).unwrap();
        Self { _dir: dir, root, config }
    }

    fn dir(&self, name: &str) -> PathBuf {
        let p = self.root.join(name);
        std::fs::create_dir_all(&p).unwrap();
        p
    }

    fn synth(&self, name: &str) -> PathBuf {
        let out = self.dir(name);
        let o = run(&["synth", "--config", s(&self.config), "--federal-holidays", "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out.join("synth.csv")
    }

    fn train(&self, data: &Path, name: &str, extra: &[&str]) -> PathBuf {
        let out = self.dir(name);
        let mut args = vec!["train", "--config", s(&self.config), "--data", s(data), "--out", s(&out)];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out.join("checkpoint.json")
    }
}

#[test]
fn synth_writes_96_rows_per_day_and_reruns_identically() {
    let f = Fixture::new();
    let a = f.dir("a");
    let b = f.dir("b");
    for out in [&a, &b] {
        let o = run(&["synth", "--days", "160", "--seed", "7", "--out", s(out)]);
        assert_eq!(code(&o), 0);
    }
    let text = std::fs::read_to_string(a.join("synth.csv")).unwrap();
    assert_eq!(text.lines().count(), 15_360 + 1);
    assert_eq!(
        std::fs::read(a.join("synth.csv")).unwrap(),
        std::fs::read(b.join("synth.csv")).unwrap()
    );
    let echo = std::fs::read_to_string(a.join("run_config.json")).unwrap();
    assert!(echo.contains("\"seed\": 7"));
    assert!(echo.contains("\"days\": 160"));
}

#[test]
fn missing_output_directory_exits_2() {
    let f = Fixture::new();
    let o = run(&["synth", "--out", s(&f.root.join("nope"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn flags_override_the_config_file() {
    let f = Fixture::new();
    let out = f.dir("o");
    let o = run(&["synth", "--config", s(&f.config), "--days", "3", "--seed", "11", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(echo["config"]["seed"], 11);
    assert_eq!(echo["config"]["synth"]["days"], 3);
    assert_eq!(echo["config"]["data"]["lookback"], 8);
    assert_eq!(echo["config"]["data"]["train_ratio"], 0.8);
}

#[test]
fn bad_config_and_corrupt_csv_exit_3() {
    let f = Fixture::new();
    let bad = f.root.join("bad.toml");
    std::fs::write(&bad, "[model]\nno_such_field = 1\n").unwrap();
    let out = f.dir("o");
    assert_eq!(code(&run(&["synth", "--config", s(&bad), "--out", s(&out)])), 3);

    let data = f.synth("d");
    let mut text = std::fs::read_to_string(&data).unwrap();
    text = text.replacen("\n2012", "\nnot-a-date", 3);
    let corrupt = f.root.join("corrupt.csv");
    std::fs::write(&corrupt, text).unwrap();
    let o = run(&["train", "--config", s(&f.config), "--data", s(&corrupt), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));

    assert_eq!(code(&run(&["train", "--bogus"])), 3);
}

#[test]
fn zero_epochs_checkpoint_equals_initialization() {
    let f = Fixture::new();
    let data = f.synth("d");
    let ckpt = Checkpoint::load(&f.train(&data, "t", &["--epochs", "0"])).unwrap();
    let adjoint_core::model::CheckpointModel::Adjoint { model, params, .. } = &ckpt.model else {
        panic!("adjoint checkpoint expected");
    };
    let init = adjoint_core::model::AdjointModel::new(model.clone(), 3).unwrap();
    let restored = adjoint_core::model::AdjointModel::from_records(model.clone(), params).unwrap();
    assert_eq!(restored.store, init.store);
}

#[test]
fn train_evaluate_and_forecast_end_to_end() {
    let f = Fixture::new();
    let data = f.synth("d");
    let ckpt = f.train(&data, "t", &[]);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ckpt.with_file_name("training_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["report"]["stages"].as_array().unwrap().len(), 3);

    let ev = f.dir("e");
    let o = run(&[
        "evaluate", "--config", s(&f.config), "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&ev),
        "--compare", s(&ckpt),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let one: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ev.join("report_one_step.json")).unwrap()).unwrap();
    assert!(one["report"]["overall"]["non_coverage_68"].is_number());
    assert!(one["report"]["overall"]["non_coverage_95"].is_number());
    assert_eq!(one["config"]["seed"], 3);
    let table = std::fs::read_to_string(ev.join("comparison.csv")).unwrap();
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[4], "0", "self-comparison delta in {line}");
    }

    let fc = f.dir("f");
    let o = run(&["forecast", "--config", s(&f.config), "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&fc)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(fc.join("forecast.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "timestamp,step,point,mean,std,lo68,hi68,lo95,hi95");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[6] <= r[4] && r[4] <= r[5] && r[5] <= r[7], "nesting {r:?}");
    }
    let again = f.dir("f2");
    run(&["forecast", "--config", s(&f.config), "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&again)]);
    assert_eq!(text, std::fs::read_to_string(again.join("forecast.csv")).unwrap());
}

#[test]
fn oracle_checkpoint_scores_zero_error() {
    let f = Fixture::new();
    let data = f.synth("d");
    let ckpt = f.root.join("oracle.json");
    Checkpoint::oracle(8, 4).save(&ckpt).unwrap();
    let ev = f.dir("e");
    let o = run(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&ev), "--mc-samples", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for mode in ["one_step", "multi_step"] {
        let r: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(ev.join(format!("report_{mode}.json"))).unwrap(),
        )
        .unwrap();
        let all = &r["report"]["overall"]["all"];
        assert_eq!((all["rmse"].as_f64(), all["mae"].as_f64(), all["mape"].as_f64()), (Some(0.0), Some(0.0), Some(0.0)));
    }
}

#[test]
fn comparing_checkpoints_on_different_splits_exits_4() {
    let f = Fixture::new();
    let data = f.synth("d");
    let a = f.train(&data, "a", &["--epochs", "0"]);
    let b = f.train(&data, "b", &["--epochs", "0", "--horizon", "5"]);
    let ev = f.dir("e");
    let o = run(&[
        "evaluate", "--config", s(&f.config), "--checkpoint", s(&a), "--data", s(&data), "--out", s(&ev),
        "--compare", s(&b),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn short_history_forecast_exits_5() {
    let f = Fixture::new();
    let data = f.synth("d");
    let ckpt = f.train(&data, "t", &["--epochs", "0"]);
    let text = std::fs::read_to_string(&data).unwrap();
    let short: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
    let short_path = f.root.join("short.csv");
    std::fs::write(&short_path, short).unwrap();
    let out = f.dir("f");
    let o = run(&["forecast", "--checkpoint", s(&ckpt), "--data", s(&short_path), "--out", s(&out)]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_and_evaluate_rerun_byte_identically() {
    let f = Fixture::new();
    let data = f.synth("d");
    let mut outputs = Vec::new();
    for name in ["r1", "r2"] {
        let ckpt = f.train(&data, name, &[]);
        let ev = f.dir(&format!("{name}-eval"));
        let o = run(&["evaluate", "--config", s(&f.config), "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&ev)]);
        assert_eq!(code(&o), 0);
        outputs.push((
            std::fs::read(&ckpt).unwrap(),
            std::fs::read(ckpt.with_file_name("training_report.json")).unwrap(),
            std::fs::read(ev.join("report_one_step.json")).unwrap(),
            std::fs::read(ev.join("report_multi_step.json")).unwrap(),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}
