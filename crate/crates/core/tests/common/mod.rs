#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use slimjsp::model::params::is_bias;
use slimjsp::model::{init_params, sequence_log_prob, ModelDims, ModelParams};
use slimjsp::{rng, Instance, PartialSchedule, Solution, Time};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Glorot weights plus small random biases, so bias gradients are exercised.
pub fn random_params(seed: u64, dims: ModelDims) -> ModelParams {
    let mut p = init_params(seed, dims);
    let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
    let mut r = rng::stream(seed, 9_999);
    for (name, t) in names.iter().zip(p.tensors_mut()) {
        if is_bias(name) {
            for v in t.as_mut_slice() {
                *v = r.gen_range(-0.3..0.3);
            }
        }
    }
    p
}

/// Decision sequence picking legal job `choices[t] % legal` at step `t`
/// (choices are recycled).
pub fn decisions_from(inst: &Instance, choices: &[u32]) -> Vec<usize> {
    let mut s = PartialSchedule::new(inst);
    let mut out = Vec::with_capacity(inst.num_ops());
    let mut t = 0;
    while !s.is_complete() {
        let legal: Vec<usize> = s.legal_jobs().collect();
        let c = if choices.is_empty() {
            0
        } else {
            choices[t % choices.len()] as usize
        };
        let j = legal[c % legal.len()];
        s.step(j).unwrap();
        out.push(j);
        t += 1;
    }
    out
}

/// Same routes, every duration multiplied by `k`.
pub fn scaled(inst: &Instance, k: Time) -> Instance {
    let jobs = inst
        .jobs()
        .into_iter()
        .map(|ops| ops.into_iter().map(|(m, d)| (m, d * k)).collect())
        .collect();
    Instance::new(format!("{}x{k}", inst.name), inst.num_machines(), jobs).unwrap()
}

/// Jobs reordered so that new job `k` is old job `order[k]`.
pub fn relabeled(inst: &Instance, order: &[usize]) -> Instance {
    let jobs = inst.jobs();
    let jobs = order.iter().map(|&j| jobs[j].clone()).collect();
    Instance::new(format!("{}-perm", inst.name), inst.num_machines(), jobs).unwrap()
}

fn mean_log_prob(params: &ModelParams, inst: &Instance, label: &Solution) -> f64 {
    let lp = sequence_log_prob(params, inst, &label.decisions).unwrap();
    lp.iter().sum::<f64>() / lp.len() as f64
}

/// Per-tensor comparison of `grad` with central differences of the mean
/// log-probability of `label`.
pub struct FdReport {
    pub name: String,
    /// Entries with |grad| > 1e-8, compared by relative error.
    pub checked: usize,
    pub worst_rel: f64,
    /// Entries with |grad| <= 1e-8 whose numeric value is not also ~0.
    pub small_mismatches: usize,
}

/// `stride` > 1 checks every `stride`-th element only.
pub fn finite_difference_errors(
    params: &ModelParams,
    grad: &ModelParams,
    inst: &Instance,
    label: &Solution,
    eps: f64,
    stride: usize,
) -> Vec<FdReport> {
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    let grads: Vec<Vec<f64>> = grad
        .tensors()
        .iter()
        .map(|t| t.as_slice().to_vec())
        .collect();
    let mut work = params.clone();
    let mut out = Vec::new();
    for (ti, name) in names.iter().enumerate() {
        let mut r = FdReport {
            name: name.clone(),
            checked: 0,
            worst_rel: 0.0,
            small_mismatches: 0,
        };
        for e in (0..grads[ti].len()).step_by(stride.max(1)) {
            let orig = work.tensors()[ti].as_slice()[e];
            work.tensors_mut()[ti].as_mut_slice()[e] = orig + eps;
            let up = mean_log_prob(&work, inst, label);
            work.tensors_mut()[ti].as_mut_slice()[e] = orig - eps;
            let down = mean_log_prob(&work, inst, label);
            work.tensors_mut()[ti].as_mut_slice()[e] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads[ti][e];
            if analytic.abs() <= 1e-8 {
                r.small_mismatches += usize::from((numeric - analytic).abs() > 1e-7);
                continue;
            }
            let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs());
            r.worst_rel = r.worst_rel.max(rel);
            r.checked += 1;
        }
        out.push(r);
    }
    out
}
