//! Self-labeling training: sample, keep the best solution, imitate it.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::adam::Adam;
use super::config::{Shape, TrainConfig};
use crate::error::{Error, Result};
use crate::instance::{generate_instance, Instance, Time};
use crate::model::{
    init_params, rollout, sequence_log_prob_grad, Checkpoint, DecodeMode, ModelDims, ModelParams,
};
use crate::rng;
use crate::schedule::Solution;

const TRAIN_TAG: u64 = 1;
const HOLDOUT_TAG: u64 = 2;
const INIT_TAG: u64 = 3;
const SHUFFLE_TAG: u64 = 4;
const ROLLOUT_TAG: u64 = 5;
const VALID_TAG: u64 = 6;

/// Cross-entropy of a pseudo-label: the negated mean of its step log-probabilities.
pub fn slim_loss(log_probs: &[f64]) -> Result<f64> {
    if log_probs.is_empty() {
        return Err(Error::Empty("log-probabilities"));
    }
    Ok(-log_probs.iter().sum::<f64>() / log_probs.len() as f64)
}

/// Index of the minimum-makespan solution; the earliest sample wins ties.
pub fn pseudo_label_index(solutions: &[Solution]) -> Result<usize> {
    solutions
        .iter()
        .enumerate()
        .min_by_key(|(i, s)| (s.makespan, *i))
        .map(|(i, _)| i)
        .ok_or(Error::Empty("solutions"))
}

pub fn select_pseudo_label(solutions: &[Solution]) -> Result<&Solution> {
    Ok(&solutions[pseudo_label_index(solutions)?])
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceStats {
    pub name: String,
    pub loss: f64,
    pub best_makespan: Time,
    pub label_index: usize,
    pub sample_makespans: Vec<Time>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub instances: Vec<InstanceStats>,
}

impl StepStats {
    pub fn mean_loss(&self) -> f64 {
        self.instances.iter().map(|s| s.loss).sum::<f64>() / self.instances.len() as f64
    }
}

/// Loss, gradient of the loss and statistics for one instance.
pub fn instance_gradient(
    params: &ModelParams,
    inst: &Instance,
    beta: usize,
    seed: u64,
) -> Result<(InstanceStats, ModelParams)> {
    let samples = rollout(params, inst, beta, DecodeMode::Sample, seed)?;
    let label_index = pseudo_label_index(&samples)?;
    let label = &samples[label_index];
    let (log_probs, mut grad) = sequence_log_prob_grad(params, inst, &label.decisions)?;
    let loss = slim_loss(&log_probs)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss on instance {} (label makespan {})",
            inst.name, label.makespan
        )));
    }
    // The replay returns d(mean log p); the loss is its negation.
    for t in grad.tensors_mut() {
        t.scale(-1.0);
    }
    let stats = InstanceStats {
        name: inst.name.clone(),
        loss,
        best_makespan: label.makespan,
        label_index,
        sample_makespans: samples.iter().map(|s| s.makespan).collect(),
    };
    Ok((stats, grad))
}

/// One optimizer step on the mean gradient over `batch`. Instance `i` samples
/// with seed `derive_seed(seed, i)`. Gradients are reduced in batch order, so
/// the result does not depend on the number of worker threads.
pub fn train_step(
    params: &mut ModelParams,
    adam: &mut Adam,
    batch: &[Instance],
    beta: usize,
    seed: u64,
) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let shared: &ModelParams = params;
    let results = batch
        .par_iter()
        .enumerate()
        .map(|(i, inst)| instance_gradient(shared, inst, beta, rng::derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut total = ModelParams::zeros(params.dims);
    let k = 1.0 / batch.len() as f64;
    let mut instances = Vec::with_capacity(batch.len());
    for (stats, grad) in results {
        total.add_scaled(&grad, k);
        instances.push(stats);
    }
    adam.update_params(params, &total)?;
    Ok(StepStats { instances })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub per_shape: BTreeMap<Shape, f64>,
    /// Mean over all instances regardless of shape.
    pub overall: f64,
}

/// Average over `holdout` of the best makespan among `beta` samples.
/// Instance `i` uses seed `derive_seed(seed, i)`.
pub fn validate(
    params: &ModelParams,
    holdout: &[Instance],
    beta: usize,
    seed: u64,
) -> Result<Validation> {
    let best = holdout
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let sols = rollout(
                params,
                inst,
                beta,
                DecodeMode::Sample,
                rng::derive_seed(seed, i as u64),
            )?;
            Ok(select_pseudo_label(&sols)?.makespan)
        })
        .collect::<Result<Vec<Time>>>()?;
    summarize(holdout, &best)
}

/// Per-shape and overall means of `values` (aligned with `instances`).
pub fn summarize(instances: &[Instance], values: &[Time]) -> Result<Validation> {
    if instances.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut groups: BTreeMap<Shape, (f64, usize)> = BTreeMap::new();
    for (inst, &v) in instances.iter().zip(values) {
        let (n, m) = inst.shape();
        let e = groups.entry(Shape::new(n, m)).or_default();
        e.0 += v as f64;
        e.1 += 1;
    }
    let overall = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
    Ok(Validation {
        per_shape: groups
            .into_iter()
            .map(|(s, (t, c))| (s, t / c as f64))
            .collect(),
        overall,
    })
}

fn make_set(cfg: &TrainConfig, per_shape: usize, tag: u64) -> Result<Vec<Instance>> {
    let base = rng::derive_seed(cfg.seed, tag);
    let mut out = Vec::with_capacity(per_shape * cfg.shapes.len());
    for shape in &cfg.shapes {
        for _ in 0..per_shape {
            let seed = rng::derive_seed(base, out.len() as u64);
            out.push(generate_instance(shape.jobs, shape.machines, seed)?);
        }
    }
    Ok(out)
}

/// The fixed training set described by `cfg`.
pub fn training_set(cfg: &TrainConfig) -> Result<Vec<Instance>> {
    make_set(cfg, cfg.instances_per_shape, TRAIN_TAG)
}

/// The hold-out set described by `cfg`, disjoint in seeds from the training set.
pub fn holdout_set(cfg: &TrainConfig) -> Result<Vec<Instance>> {
    make_set(cfg, cfg.holdout_per_shape, HOLDOUT_TAG)
}

/// Seed used for every validation pass, so passes are comparable.
pub fn validation_seed(cfg: &TrainConfig) -> u64 {
    rng::derive_seed(cfg.seed, VALID_TAG)
}

pub fn initial_params(cfg: &TrainConfig) -> ModelParams {
    let dims = if cfg.tiny_model {
        ModelDims::tiny()
    } else {
        ModelDims::default()
    };
    init_params(rng::derive_seed(cfg.seed, INIT_TAG), dims)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub initial: Validation,
    pub best: Validation,
    /// `(optimizer step, validation)` for every validation pass after the first.
    pub history: Vec<(usize, Validation)>,
    pub steps: Vec<StepStats>,
    pub params: ModelParams,
}

#[derive(serde::Serialize)]
struct LogRow<'a> {
    step: usize,
    epoch: usize,
    instance_name: &'a str,
    loss: f64,
    best_makespan: Time,
    valid_avg: f64,
    wall_ms: u128,
}

/// Full training run. The best parameters by hold-out average are kept in
/// `cfg.checkpoint`; a later pass must be strictly better to replace them.
pub fn train_loop(cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut data = training_set(cfg)?;
    let holdout = holdout_set(cfg)?;
    let valid_seed = validation_seed(cfg);
    let mut params = initial_params(cfg);
    let mut adam = Adam::new(cfg.adam(), params.num_scalars());

    let log_path = cfg.log_path();
    if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut log = csv::Writer::from_path(&log_path)?;
    log.write_record([
        "step",
        "epoch",
        "instance_name",
        "loss",
        "best_makespan",
        "valid_avg",
        "wall_ms",
    ])?;

    let initial = validate(&params, &holdout, cfg.beta_valid, valid_seed)?;
    info!("initial validation average {:.3}", initial.overall);
    let mut best = initial.clone();
    save_checkpoint(cfg, &params, 0, 0, &best)?;
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    let mut history = Vec::new();
    let mut steps = Vec::new();
    let mut step = 0usize;
    let mut last_valid = initial.overall;
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng::stream(rng::derive_seed(cfg.seed, SHUFFLE_TAG), epoch as u64);
        data.shuffle(&mut shuffle_rng);
        let num_batches = data.len().div_ceil(cfg.batch_accum);
        for (b, batch) in data.chunks(cfg.batch_accum).enumerate() {
            let seed = rng::derive_seed(rng::derive_seed(cfg.seed, ROLLOUT_TAG), step as u64);
            let stats = train_step(&mut params, &mut adam, batch, cfg.beta_train, seed)?;
            step += 1;

            let end_of_epoch = b + 1 == num_batches;
            if end_of_epoch || (cfg.validate_every > 0 && step.is_multiple_of(cfg.validate_every)) {
                let v = validate(&params, &holdout, cfg.beta_valid, valid_seed)?;
                info!(
                    "epoch {epoch} step {step}: loss {:.4}, validation average {:.3}",
                    stats.mean_loss(),
                    v.overall
                );
                last_valid = v.overall;
                if v.overall < best.overall {
                    best = v.clone();
                    save_checkpoint(cfg, &params, step, epoch, &best)?;
                }
                history.push((step, v));
            }
            let wall_ms = clock.elapsed().as_millis();
            for s in &stats.instances {
                log.serialize(LogRow {
                    step,
                    epoch,
                    instance_name: &s.name,
                    loss: s.loss,
                    best_makespan: s.best_makespan,
                    valid_avg: last_valid,
                    wall_ms,
                })?;
            }
            log.flush().map_err(|e| Error::io(&log_path, e))?;
            steps.push(stats);
        }
    }
    Ok(TrainReport {
        checkpoint: cfg.checkpoint.clone(),
        log: log_path,
        initial,
        best,
        history,
        steps,
        params,
    })
}

fn save_checkpoint(
    cfg: &TrainConfig,
    params: &ModelParams,
    step: usize,
    epoch: usize,
    v: &Validation,
) -> Result<()> {
    let mut ck = Checkpoint::new(params.clone());
    ck.meta.insert("step".into(), step.to_string());
    ck.meta.insert("epoch".into(), epoch.to_string());
    ck.meta
        .insert("valid_avg".into(), format!("{:?}", v.overall));
    ck.meta.insert("seed".into(), cfg.seed.to_string());
    ck.save(&cfg.checkpoint)
}
