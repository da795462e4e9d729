//! Solution construction with the model, and teacher-forced replay.

use std::str::FromStr;

use rand::Rng;

use super::decoder::{
    ready_rows, reference_backward, reference_forward, DecodeScratch, DecoderPlan, MASKED_LOGIT,
};
use super::encoder::{encode, encode_with_cache, encoder_backward};
use super::mat::Mat;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::features::context_features;
use crate::instance::Instance;
use crate::rng;
use crate::schedule::{PartialSchedule, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(DecodeMode::Greedy),
            "sample" => Ok(DecodeMode::Sample),
            other => Err(Error::Config(format!("unknown decode mode '{other}'"))),
        }
    }
}

/// Draws a job from `probs`, skipping masked entries.
fn sample_job(probs: &[f64], logits: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (j, (&p, &z)) in probs.iter().zip(logits).enumerate() {
        if z == MASKED_LOGIT {
            continue;
        }
        last = j;
        cum += p;
        if u < cum {
            return j;
        }
    }
    last
}

fn greedy_job(probs: &[f64], logits: &[f64]) -> usize {
    let mut best: Option<usize> = None;
    for (j, (&p, &z)) in probs.iter().zip(logits).enumerate() {
        if z == MASKED_LOGIT {
            continue;
        }
        if best.is_none_or(|b| p > probs[b]) {
            best = Some(j);
        }
    }
    best.expect("at least one uncompleted job")
}

/// Builds `beta` solutions in parallel decision steps. Sample `i` draws from
/// its own stream `(seed, i)`, so the first `k` solutions do not depend on
/// `beta`. Greedy mode always returns exactly one solution.
pub fn rollout(
    params: &ModelParams,
    inst: &Instance,
    beta: usize,
    mode: DecodeMode,
    seed: u64,
) -> Result<Vec<Solution>> {
    let beta = match mode {
        DecodeMode::Greedy => 1,
        DecodeMode::Sample => beta.max(1),
    };
    let emb = encode(params, inst)?;
    let plan = DecoderPlan::new(params);
    let proj = plan.embed_projection(&emb);
    let mut scratch = DecodeScratch::default();
    let mut schedules: Vec<PartialSchedule<'_>> =
        (0..beta).map(|_| PartialSchedule::new(inst)).collect();
    let mut streams: Vec<_> = (0..beta).map(|i| rng::stream(seed, i as u64)).collect();

    for _ in 0..inst.num_ops() {
        let refs: Vec<&PartialSchedule<'_>> = schedules.iter().collect();
        let all_logits = plan.logits_batch(&refs, &proj, &mut scratch);
        for ((s, logits), stream) in schedules.iter_mut().zip(all_logits).zip(&mut streams) {
            let mut probs = logits.clone();
            super::mat::softmax_in_place(&mut probs);
            let job = match mode {
                DecodeMode::Greedy => greedy_job(&probs, &logits),
                DecodeMode::Sample => sample_job(&probs, &logits, stream.gen::<f64>()),
            };
            s.step(job)?;
        }
    }
    schedules
        .into_iter()
        .map(PartialSchedule::into_solution)
        .collect()
}

/// Teacher-forced log-probabilities of each decision in `decisions`.
pub fn sequence_log_prob(
    params: &ModelParams,
    inst: &Instance,
    decisions: &[usize],
) -> Result<Vec<f64>> {
    replay(params, inst, decisions, false).map(|(lp, _)| lp)
}

/// Log-probabilities of `decisions` plus the gradient of their mean with
/// respect to every parameter.
pub fn sequence_log_prob_grad(
    params: &ModelParams,
    inst: &Instance,
    decisions: &[usize],
) -> Result<(Vec<f64>, ModelParams)> {
    replay(params, inst, decisions, true).map(|(lp, g)| (lp, g.expect("gradient requested")))
}

fn replay(
    params: &ModelParams,
    inst: &Instance,
    decisions: &[usize],
    with_grad: bool,
) -> Result<(Vec<f64>, Option<ModelParams>)> {
    let o = inst.num_ops();
    if decisions.len() != o {
        return Err(Error::ScheduleIncomplete {
            scheduled: decisions.len(),
            total: o,
        });
    }
    let (emb, enc_cache) = encode_with_cache(params, inst)?;
    let mut grads = with_grad.then(|| ModelParams::zeros(params.dims));
    let mut d_emb = Mat::zeros(emb.rows(), emb.cols());
    let mut log_probs = Vec::with_capacity(o);
    let mut s = PartialSchedule::new(inst);
    let weight = 1.0 / o as f64;

    for &job in decisions {
        if job >= inst.num_jobs() {
            return Err(Error::JobOutOfRange {
                job,
                num_jobs: inst.num_jobs(),
            });
        }
        if s.is_job_done(job) {
            return Err(Error::JobCompleted { job });
        }
        let (ready, done) = ready_rows(&s);
        let cache = reference_forward(params, &emb, &context_features(&s), &ready, &done)?;
        let max = cache
            .logits
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max
            + cache
                .logits
                .iter()
                .map(|&z| (z - max).exp())
                .sum::<f64>()
                .ln();
        log_probs.push(cache.logits[job] - log_norm);

        if let Some(g) = grads.as_mut() {
            // d(log p_y)/dz = onehot(y) - p, scaled for the mean over steps.
            let dlogits: Vec<f64> = cache
                .probs
                .iter()
                .enumerate()
                .map(|(j, &p)| weight * (f64::from(u8::from(j == job)) - p))
                .collect();
            reference_backward(params, g, &cache, &dlogits, &mut d_emb);
        }
        s.step(job)?;
    }
    if let Some(g) = grads.as_mut() {
        encoder_backward(params, g, &enc_cache, &d_emb);
    }
    Ok((log_probs, grads))
}
