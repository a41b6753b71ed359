use std::fs;
use std::path::Path;

use adjoint_core::data::{
    calendar_indicators, export_csv, generate_synthetic, ingest_csv, split, window,
    Schema, SplitSpec, SynthConfig, WindowedDataset,
};
use adjoint_core::metrics::{
    compare, comparison_csv, coverage_csv, evaluate_both, monthly_csv, Comparison, EvalConfig,
    EvaluationReport,
};
use adjoint_core::model::{load_forecaster, Checkpoint, CheckpointModel, TrainedModel, Variant};
use adjoint_core::pipeline::{fit, forecast_next, prepare};
use adjoint_core::uncertainty::ForecastWithCI;
use anyhow::{Context, Result};
use chrono::NaiveDateTime;
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};
use crate::{Cli, Command, Common, EvaluateArgs, ForecastArgs, SplitMismatch, SynthArgs, TrainArgs, VariantArg};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Forecast(a) => forecast(a),
    }
}

/// Loads the config file and applies the common flags.
fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.training.seed = cfg.seed;
    if !common.out.is_dir() {
        return Err(adjoint_core::Error::io(
            &common.out,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        )
        .into());
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: &'a serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a T>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| adjoint_core::Error::io(path, e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, command: &str, config: &serde_json::Value, report: Option<&T>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Envelope { command, config, report })?;
    text.push('\n');
    write_text(path, &text)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    if let Some(days) = a.days {
        cfg.synth.days = days;
    }
    if let Some(start) = a.start {
        cfg.synth.start = start;
    }
    if let Some(noise) = a.noise {
        cfg.synth.noise_sigma = noise;
    }
    if let Some(path) = a.holidays {
        cfg.synth.holidays_file = Some(path);
    }
    cfg.synth.federal_holidays |= a.federal_holidays;

    let holidays = cfg.holidays(cfg.synth.start, cfg.synth.days)?;
    let series = generate_synthetic(&SynthConfig {
        start: cfg.synth.start,
        days: cfg.synth.days,
        seed: cfg.seed,
        holidays,
        noise_sigma: cfg.synth.noise_sigma,
        ..SynthConfig::default()
    })?;
    let out = &a.common.out;
    export_csv(&series, &out.join("synth.csv"))?;
    write_json::<()>(&out.join("run_config.json"), "synth", &cfg.to_json(), None)?;
    println!("wrote {} rows to {}", series.len(), out.join("synth.csv").display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    if let Some(epochs) = a.epochs {
        cfg.training = cfg.training.clone().with_epochs(epochs);
    }
    if let Some(l) = a.lookback {
        cfg.data.lookback = l;
    }
    if let Some(h) = a.horizon {
        cfg.data.horizon = h;
    }
    let series = ingest_csv(&a.data, &Schema::default())
        .with_context(|| format!("reading {}", a.data.display()))?;
    let data = prepare(&series, cfg.data.lookback, cfg.data.horizon, &cfg.data.split_spec())?;
    let (trained, report) = fit(&data, cfg.model.clone(), &cfg.training)?;
    cfg.model = trained.model.config.clone();
    let echo = cfg.to_json();

    let ds = &data.splits.train;
    let ckpt = Checkpoint::adjoint(
        &trained.model,
        &trained.normalizer,
        ds.feature_names.to_vec(),
        ds.ancillary_names.to_vec(),
        cfg.seed,
        echo.clone(),
    );
    let out = &a.common.out;
    ckpt.save(&out.join("checkpoint.json"))?;
    write_json(&out.join("training_report.json"), "train", &echo, Some(&report))?;

    println!("parameters: {}", report.parameter_count);
    for s in &report.stages {
        let best = s.best_epoch.map(|e| s.validation_rmse[e]);
        println!(
            "stage {:<10} epochs {:>3}  best validation rmse {}",
            s.stage,
            s.validation_rmse.len(),
            best.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
        );
    }
    let (w1, w2) = trained.model.combiner_weights();
    println!("combiner w1 {w1:?} w2 {w2:?}");
    println!("wrote {}", out.join("checkpoint.json").display());
    Ok(())
}

/// The test split a checkpoint was trained against.
fn checkpoint_test_split(ckpt: &Checkpoint, data: &Path) -> Result<WindowedDataset> {
    let (l, h) = match &ckpt.model {
        CheckpointModel::Adjoint { model, .. } => (model.lookback, model.horizon),
        CheckpointModel::Oracle { lookback, horizon } => (*lookback, *horizon),
    };
    let spec = match &ckpt.config {
        serde_json::Value::Null => SplitSpec::default(),
        v => serde_json::from_value::<RunConfig>(v.clone())
            .map_err(|e| ConfigError(format!("checkpoint config: {e}")))?
            .data
            .split_spec(),
    };
    let series = ingest_csv(data, &Schema::default()).with_context(|| format!("reading {}", data.display()))?;
    Ok(split(&window(&series, l, h)?, &spec)?.test)
}

fn tag(path: &Path, variant: Variant) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    match variant {
        Variant::Adjoint => stem.to_string(),
        Variant::MainOnly => format!("{stem}:main_only"),
    }
}

fn score(ckpt_path: &Path, data: &Path, variant: Variant, eval: &EvalConfig) -> Result<(EvaluationReport, EvaluationReport)> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let test = checkpoint_test_split(&ckpt, data)?;
    let model = load_forecaster(&ckpt, variant)?;
    Ok(evaluate_both(model.as_ref(), &test, eval, &tag(ckpt_path, variant))?)
}

fn checked_compare(a: &EvaluationReport, b: &EvaluationReport) -> Result<Comparison> {
    if a.split_digest != b.split_digest {
        return Err(SplitMismatch(format!(
            "{} was scored on split {}, {} on split {}",
            a.model_tag, a.split_digest, b.model_tag, b.split_digest
        ))
        .into());
    }
    Ok(compare(a, b)?)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    if let Some(n) = a.mc_samples {
        cfg.eval.mc_samples = n;
    }
    let eval = EvalConfig {
        mc_samples: cfg.eval.mc_samples,
        seed: cfg.seed,
        interval_mode: cfg.eval.interval_mode,
    };
    let variant = match a.variant {
        VariantArg::Adjoint => Variant::Adjoint,
        VariantArg::MainOnly => Variant::MainOnly,
    };
    let echo = cfg.to_json();
    let out = &a.common.out;

    let (one, multi) = score(&a.checkpoint, &a.data, variant, &eval)?;
    let other = match (&a.compare, a.compare_main_only) {
        (Some(path), _) => Some(score(path, &a.data, Variant::Adjoint, &eval)?),
        (None, true) => Some(score(&a.checkpoint, &a.data, Variant::MainOnly, &eval)?),
        (None, false) => None,
    };

    write_json(&out.join("report_one_step.json"), "evaluate", &echo, Some(&one))?;
    write_json(&out.join("report_multi_step.json"), "evaluate", &echo, Some(&multi))?;
    let mut reports = vec![&one, &multi];
    if let Some((o1, om)) = &other {
        reports.extend([o1, om]);
    }
    write_text(&out.join("monthly.csv"), &monthly_csv(&reports)?)?;
    write_text(&out.join("coverage.csv"), &coverage_csv(&reports)?)?;
    write_json::<()>(&out.join("run_config.json"), "evaluate", &echo, None)?;

    for r in [&one, &multi] {
        let o = &r.overall;
        println!(
            "{:<10} {:<11} rmse {:.4} mae {:.4} mape {:.4} nc68 {:.4} nc95 {:.4}",
            r.model_tag,
            r.mode.name(),
            o.all.rmse,
            o.all.mae,
            o.all.mape,
            o.non_coverage_68,
            o.non_coverage_95
        );
    }

    if let Some((o1, om)) = &other {
        let tables = [checked_compare(&one, o1)?, checked_compare(&multi, om)?];
        write_json(&out.join("comparison.json"), "evaluate", &echo, Some(&tables))?;
        write_text(&out.join("comparison.csv"), &comparison_csv(&[&tables[0], &tables[1]])?)?;
        for t in &tables {
            println!("{} vs {} ({})", t.adjoint_tag, t.plain_tag, t.mode.name());
            for r in &t.rows {
                println!(
                    "  {:<16} {:>10.4} {:>10.4} {:>+10.4}{}",
                    r.metric,
                    r.adjoint,
                    r.plain,
                    r.delta,
                    if r.adjoint_better { "  *" } else { "" }
                );
            }
        }
    }
    Ok(())
}

fn forecast_csv(timestamps: &[NaiveDateTime], ci: &ForecastWithCI) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "step", "point", "mean", "std", "lo68", "hi68", "lo95", "hi95"])?;
    for (j, ts) in timestamps.iter().enumerate() {
        w.write_record([
            ts.format(adjoint_core::data::series::TIMESTAMP_FORMAT).to_string(),
            (j + 1).to_string(),
            ci.point[j].to_string(),
            ci.mean[j].to_string(),
            ci.std[j].to_string(),
            ci.lo68[j].to_string(),
            ci.hi68[j].to_string(),
            ci.lo95[j].to_string(),
            ci.hi95[j].to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn forecast(a: ForecastArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    if let Some(n) = a.mc_samples {
        cfg.eval.forecast_samples = n;
    }
    if let Some(path) = a.holidays {
        cfg.synth.holidays_file = Some(path);
    }
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let CheckpointModel::Adjoint {
        model,
        normalizer,
        params,
        ..
    } = &ckpt.model
    else {
        return Err(ConfigError("an oracle checkpoint cannot forecast".into()).into());
    };
    let trained = TrainedModel::new(
        adjoint_core::model::AdjointModel::from_records(model.clone(), params)?,
        normalizer.clone(),
        Variant::Adjoint,
    );
    let history = ingest_csv(&a.data, &Schema::default()).with_context(|| format!("reading {}", a.data.display()))?;
    let Some(&last) = history.timestamps.last() else {
        return Err(adjoint_core::Error::InsufficientHistory {
            needed: model.lookback,
            got: 0,
        }
        .into());
    };
    let future: Vec<NaiveDateTime> = (1..=model.horizon as i32)
        .map(|j| last + adjoint_core::data::series::step() * j)
        .collect();
    let first = future[0].date();
    let days = (future[future.len() - 1].date() - first).num_days() as usize + 1;
    let holidays = cfg.holidays(first, days)?;
    let flags = calendar_indicators(&future, &holidays);
    let f = forecast_next(&trained, &history, &flags, cfg.eval.forecast_samples, cfg.seed, cfg.eval.interval_mode)?;

    let out = &a.common.out;
    write_text(&out.join("forecast.csv"), &forecast_csv(&f.timestamps, &f.ci)?)?;
    write_json::<()>(&out.join("run_config.json"), "forecast", &cfg.to_json(), None)?;
    println!(
        "forecast {} steps from {} to {}",
        f.timestamps.len(),
        f.timestamps[0],
        f.timestamps[f.timestamps.len() - 1]
    );
    Ok(())
}
