//! Three-stage training: main network, ancillary network, then the combiner
//! weights with both subnetworks frozen.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Normalizer, WindowedDataset};
use crate::error::{Error, Result};
use crate::layers::{DropoutMode, MaskSource};
use crate::model::adjoint::{AdjointModel, Variant, ANCILLARY_PREFIX, COMBINER_PREFIX, MAIN_PREFIX};
use crate::model::batch::Batch;
use crate::nn::{kernels, AdamConfig, Graph, OptimizerState, Tensor, Var};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs_main: usize,
    pub epochs_ancillary: usize,
    pub epochs_combiner: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub combiner_learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation improvement before a stage stops.
    pub patience: usize,
    /// Trains all parameters in the last stage instead of only `w1`, `w2`.
    pub joint_fine_tune: bool,
    /// Keep every `n`-th training and validation window.
    pub window_stride: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs_main: 30,
            epochs_ancillary: 30,
            epochs_combiner: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            combiner_learning_rate: 1e-2,
            seed: 0,
            patience: 5,
            joint_fine_tune: false,
            window_stride: 1,
        }
    }
}

impl TrainingConfig {
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs_main = epochs;
        self.epochs_ancillary = epochs;
        self.epochs_combiner = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.window_stride == 0 {
            return Err(Error::Domain(
                "batch_size, patience and window_stride must be positive".into(),
            ));
        }
        for (name, lr) in [
            ("learning_rate", self.learning_rate),
            ("combiner_learning_rate", self.combiner_learning_rate),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {lr}")));
            }
        }
        Ok(())
    }
}

/// Per-epoch RMSE (°F) of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub train_rmse: Vec<f64>,
    pub validation_rmse: Vec<f64>,
    /// Epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl StageReport {
    fn new(stage: &str) -> Self {
        Self {
            stage: stage.into(),
            train_rmse: Vec::new(),
            validation_rmse: Vec::new(),
            best_epoch: None,
            stopped_early: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    pub stages: Vec<StageReport>,
    pub parameter_count: usize,
    /// Not serialized, so saved reports stay byte-stable.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl PartialEq for TrainingReport {
    fn eq(&self, other: &Self) -> bool {
        self.stages == other.stages && self.parameter_count == other.parameter_count
    }
}

/// Fixed-order view of the training and validation windows.
struct Data<'a> {
    train_ds: &'a WindowedDataset,
    train: Vec<usize>,
    valid_ds: &'a WindowedDataset,
    valid: Vec<usize>,
    norm: &'a Normalizer,
    anc_steps: bool,
}

impl Data<'_> {
    fn batch(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Batch> {
        Batch::from_dataset(ds, idx, self.norm, self.anc_steps)
    }
}

fn strided(n: usize, stride: usize) -> Vec<usize> {
    (0..n).step_by(stride).collect()
}

/// What one stage optimizes.
#[derive(Clone, Copy)]
enum Stage {
    Main,
    Ancillary,
    Combiner,
    Joint,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Main => "main",
            Stage::Ancillary => "ancillary",
            Stage::Combiner => "combiner",
            Stage::Joint => "joint",
        }
    }

    fn prefixes(self) -> &'static [&'static str] {
        match self {
            Stage::Main => &[MAIN_PREFIX],
            Stage::Ancillary => &[ANCILLARY_PREFIX],
            Stage::Combiner => &[COMBINER_PREFIX],
            Stage::Joint => &[MAIN_PREFIX, ANCILLARY_PREFIX, COMBINER_PREFIX],
        }
    }
}

/// Trains `model` in place and reports per-epoch errors.
///
/// Stages 1 and 2 fit the main and ancillary networks separately against the
/// targets. Stage 3 fits only the combiner weights on the frozen subnetworks'
/// dropout-off outputs, or, with `joint_fine_tune`, every parameter through
/// the combined output. Each stage keeps the parameters of its best
/// validation epoch.
pub fn train(
    model: &mut AdjointModel,
    train_ds: &WindowedDataset,
    valid_ds: &WindowedDataset,
    norm: &Normalizer,
    cfg: &TrainingConfig,
) -> Result<TrainingReport> {
    cfg.validate()?;
    if train_ds.is_empty() || valid_ds.is_empty() {
        return Err(Error::Domain("training and validation splits must be non-empty".into()));
    }
    let c = &model.config;
    for ds in [train_ds, valid_ds] {
        if ds.lookback != c.lookback
            || ds.horizon != c.horizon
            || ds.n_features() != c.main_features
            || ds.n_ancillary() != c.ancillary_features
        {
            return Err(Error::dim(
                "train",
                &[c.lookback, c.horizon, c.main_features, c.ancillary_features],
                &[ds.lookback, ds.horizon, ds.n_features(), ds.n_ancillary()],
            ));
        }
    }
    let started = Instant::now();
    let data = Data {
        train_ds,
        train: strided(train_ds.len(), cfg.window_stride),
        valid_ds,
        valid: strided(valid_ds.len(), cfg.window_stride),
        norm,
        anc_steps: model.uses_ancillary_lstm(),
    };

    let mut stages = vec![
        run_stage(model, &data, cfg, Stage::Main, cfg.epochs_main, cfg.learning_rate)?,
        run_stage(model, &data, cfg, Stage::Ancillary, cfg.epochs_ancillary, cfg.learning_rate)?,
    ];
    let last = if cfg.joint_fine_tune {
        run_stage(model, &data, cfg, Stage::Joint, cfg.epochs_combiner, cfg.learning_rate)?
    } else {
        run_combiner_stage(model, &data, cfg)?
    };
    stages.push(last);
    model.store.set_all_trainable(true);
    model.store.zero_grad();

    Ok(TrainingReport {
        stages,
        parameter_count: model.parameter_count(),
        wall_clock: started.elapsed(),
    })
}

fn freeze_all_but(model: &mut AdjointModel, stage: Stage) {
    model.store.set_all_trainable(false);
    for p in stage.prefixes() {
        model.store.set_trainable(p, true);
    }
}

fn stage_output(
    model: &AdjointModel,
    stage: Stage,
    g: &mut Graph,
    p: &crate::nn::Bound,
    batch: &Batch,
    masks: &mut MaskSource<'_>,
) -> Result<Var> {
    let spec = model.dropout(DropoutMode::Train);
    match stage {
        Stage::Main => model.main_graph(g, p, batch, &spec, masks),
        Stage::Ancillary => model.ancillary_graph(g, p, batch, &spec, masks),
        Stage::Combiner | Stage::Joint => model.output_graph(g, p, batch, Variant::Adjoint, &spec, masks),
    }
}

/// Dropout-off RMSE of a stage's output over `idx`, in scaled units.
fn stage_rmse(model: &AdjointModel, data: &Data<'_>, ds: &WindowedDataset, idx: &[usize], stage: Stage, batch_size: usize) -> Result<f64> {
    let mut sse = 0.0;
    let mut count = 0usize;
    for chunk in idx.chunks(batch_size.max(256)) {
        let batch = data.batch(ds, chunk)?;
        let pred = match stage {
            Stage::Main => model.predict_batch(&batch, Variant::MainOnly)?,
            Stage::Ancillary => model.subnetwork_outputs(&batch)?.1,
            Stage::Combiner | Stage::Joint => model.predict_batch(&batch, Variant::Adjoint)?,
        };
        let target = batch.targets.as_ref().expect("dataset batches carry targets");
        sse += pred
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += pred.len();
    }
    Ok((sse / count as f64).sqrt())
}

/// Early-stopping bookkeeping shared by all stages.
struct Progress {
    report: StageReport,
    best: f64,
    best_params: Vec<(String, Vec<f64>)>,
    wait: usize,
}

impl Progress {
    fn new(stage: Stage, model: &AdjointModel) -> Self {
        Self {
            report: StageReport::new(stage.name()),
            best: f64::INFINITY,
            best_params: snapshot(model, stage),
            wait: 0,
        }
    }

    /// Records an epoch (errors in °F); returns true when the stage should stop.
    fn record(&mut self, model: &AdjointModel, stage: Stage, epoch: usize, train: f64, valid: f64, patience: usize) -> Result<bool> {
        if !train.is_finite() || !valid.is_finite() {
            return Err(Error::Divergence {
                stage: stage.name().into(),
                epoch,
                last_finite_epoch: epoch.checked_sub(1),
            });
        }
        self.report.train_rmse.push(train);
        self.report.validation_rmse.push(valid);
        if valid < self.best {
            self.best = valid;
            self.best_params = snapshot(model, stage);
            self.report.best_epoch = Some(epoch);
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= patience {
                self.report.stopped_early = true;
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn finish(self, model: &mut AdjointModel) -> StageReport {
        model.store.restore(&self.best_params);
        self.report
    }
}

fn snapshot(model: &AdjointModel, stage: Stage) -> Vec<(String, Vec<f64>)> {
    stage
        .prefixes()
        .iter()
        .flat_map(|p| model.store.snapshot(p))
        .collect()
}

fn check_finite(model: &AdjointModel, stage: Stage, epoch: usize) -> Result<()> {
    let finite = model.store.iter().all(|p| p.tensor.all_finite());
    if finite {
        Ok(())
    } else {
        Err(Error::Divergence {
            stage: stage.name().into(),
            epoch,
            last_finite_epoch: epoch.checked_sub(1),
        })
    }
}

fn run_stage(
    model: &mut AdjointModel,
    data: &Data<'_>,
    cfg: &TrainingConfig,
    stage: Stage,
    epochs: usize,
    learning_rate: f64,
) -> Result<StageReport> {
    freeze_all_but(model, stage);
    let adam = AdamConfig {
        learning_rate,
        ..AdamConfig::default()
    };
    let mut optim = OptimizerState::new(adam, model.store.trainable_ref());
    let mut progress = Progress::new(stage, model);
    let mut order = data.train.clone();
    let scale = data.norm.target.scale;

    for epoch in 0..epochs {
        order.copy_from_slice(&data.train);
        let mut shuffle = rng::stream(cfg.seed, &format!("shuffle.{}", stage.name()), epoch as u64);
        order.shuffle(&mut shuffle);
        let mut drop_rng = rng::stream(cfg.seed, &format!("dropout.{}", stage.name()), epoch as u64);

        let mut sse = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.batch(data.train_ds, chunk)?;
            let mut g = Graph::new();
            let p = model.store.bind(&mut g);
            let mut masks = MaskSource::Shared(&mut drop_rng);
            let out = stage_output(model, stage, &mut g, &p, &batch, &mut masks)?;
            let target = g.constant(batch.targets.clone().expect("dataset batches carry targets"));
            let loss = g.rmse(out, target)?;
            let l = g.value(loss).data()[0];
            if !l.is_finite() {
                return Err(Error::Divergence {
                    stage: stage.name().into(),
                    epoch,
                    last_finite_epoch: epoch.checked_sub(1),
                });
            }
            sse += l * l * chunk.len() as f64;
            count += chunk.len();
            g.backward(loss)?;
            model.store.collect_grads(&g, &p)?;
            optim.step(&mut model.store.trainable())?;
            model.store.zero_grad();
        }
        check_finite(model, stage, epoch)?;
        let train_rmse = (sse / count as f64).sqrt();
        let valid_rmse = stage_rmse(model, data, data.valid_ds, &data.valid, stage, cfg.batch_size)?;
        if progress.record(model, stage, epoch, train_rmse * scale, valid_rmse * scale, cfg.patience)? {
            break;
        }
    }
    let report = progress.finish(model);
    model.store.set_all_trainable(true);
    Ok(report)
}

/// Dropout-off subnetwork outputs, cached once for the combiner stage.
struct Cached {
    main: Vec<f64>,
    ancillary: Vec<f64>,
    target: Vec<f64>,
}

fn cache_outputs(model: &AdjointModel, data: &Data<'_>, ds: &WindowedDataset, idx: &[usize]) -> Result<Cached> {
    let mut out = Cached {
        main: Vec::new(),
        ancillary: Vec::new(),
        target: Vec::new(),
    };
    for chunk in idx.chunks(256) {
        let batch = data.batch(ds, chunk)?;
        let (m, a) = model.subnetwork_outputs(&batch)?;
        out.main.extend(m);
        out.ancillary.extend(a);
        out.target.extend_from_slice(batch.targets.as_ref().expect("dataset batches carry targets").data());
    }
    Ok(out)
}

fn combiner_loss(model: &AdjointModel, g: &mut Graph, p: &crate::nn::Bound, cached: &Cached, rows: &[usize], h: usize) -> Result<Var> {
    let gather = |src: &[f64]| {
        let mut v = Vec::with_capacity(rows.len() * h);
        for &r in rows {
            v.extend_from_slice(&src[r * h..(r + 1) * h]);
        }
        Tensor::from_parts(vec![rows.len(), h], v)
    };
    let m = g.constant(gather(&cached.main));
    let a = g.constant(gather(&cached.ancillary));
    let t = g.constant(gather(&cached.target));
    let y = model.combine_graph(g, p, m, a)?;
    g.rmse(y, t)
}

fn run_combiner_stage(model: &mut AdjointModel, data: &Data<'_>, cfg: &TrainingConfig) -> Result<StageReport> {
    let stage = Stage::Combiner;
    let h = model.config.horizon;
    let scale = data.norm.target.scale;
    let mut progress = Progress::new(stage, model);
    if cfg.epochs_combiner == 0 {
        return Ok(progress.finish(model));
    }
    let train_cache = cache_outputs(model, data, data.train_ds, &data.train)?;
    let valid_cache = cache_outputs(model, data, data.valid_ds, &data.valid)?;
    let all_valid: Vec<usize> = (0..data.valid.len()).collect();

    freeze_all_but(model, stage);
    let adam = AdamConfig {
        learning_rate: cfg.combiner_learning_rate,
        ..AdamConfig::default()
    };
    let mut optim = OptimizerState::new(adam, model.store.trainable_ref());
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 0..cfg.epochs_combiner {
        order.sort_unstable();
        let mut shuffle = rng::stream(cfg.seed, "shuffle.combiner", epoch as u64);
        order.shuffle(&mut shuffle);
        let mut sse = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut g = Graph::new();
            let p = model.store.bind(&mut g);
            let loss = combiner_loss(model, &mut g, &p, &train_cache, chunk, h)?;
            let l = g.value(loss).data()[0];
            if !l.is_finite() {
                return Err(Error::Divergence {
                    stage: stage.name().into(),
                    epoch,
                    last_finite_epoch: epoch.checked_sub(1),
                });
            }
            sse += l * l * chunk.len() as f64;
            g.backward(loss)?;
            model.store.collect_grads(&g, &p)?;
            optim.step(&mut model.store.trainable())?;
            model.store.zero_grad();
        }
        check_finite(model, stage, epoch)?;
        let train_rmse = (sse / order.len() as f64).sqrt();
        let valid_rmse = {
            let mut g = Graph::new();
            let p = model.store.bind(&mut g);
            let loss = combiner_loss(model, &mut g, &p, &valid_cache, &all_valid, h)?;
            g.value(loss).data()[0]
        };
        if progress.record(model, stage, epoch, train_rmse * scale, valid_rmse * scale, cfg.patience)? {
            break;
        }
    }
    let report = progress.finish(model);
    model.store.set_all_trainable(true);
    Ok(report)
}

/// RMSE (°F) of a variant over a dataset, dropout off.
pub fn dataset_rmse(
    model: &AdjointModel,
    ds: &WindowedDataset,
    norm: &Normalizer,
    variant: Variant,
) -> Result<f64> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut pred = Vec::with_capacity(ds.len() * ds.horizon);
    let mut truth = Vec::with_capacity(ds.len() * ds.horizon);
    for chunk in idx.chunks(256) {
        let batch = Batch::from_dataset(ds, chunk, norm, model.uses_ancillary_lstm())?;
        pred.extend(model.predict_batch(&batch, variant)?.into_iter().map(|s| norm.target.unscale(s)));
        for &i in chunk {
            truth.extend_from_slice(ds.target(i));
        }
    }
    Ok(kernels::rmse(&pred, &truth))
}
