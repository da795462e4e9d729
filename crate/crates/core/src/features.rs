//! Operation (node) and job (context) features.
//!
//! Node features are static per instance (15 columns). Context features
//! describe each job within a partial schedule (11 columns). Durations are
//! scaled by [`DURATION_SCALE`]; context time quantities are scaled by the
//! current partial makespan clamped to at least 1.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::model::mat::Mat;
use crate::schedule::PartialSchedule;

pub const NODE_FEATURES: usize = 15;
pub const CONTEXT_FEATURES: usize = 11;

/// Divisor applied to every node feature expressed in time units.
pub const DURATION_SCALE: f64 = 99.0;

/// Linear-interpolation quartiles `(q1, q2, q3)` of a nonempty sample.
pub fn quartiles(values: &[f64]) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("quartiles of an empty list"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_quartiles(&sorted))
}

fn sorted_quartiles(v: &[f64]) -> (f64, f64, f64) {
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < v.len() {
            v[lo] + frac * (v[lo + 1] - v[lo])
        } else {
            v[lo]
        }
    };
    (q(0.25), q(0.5), q(0.75))
}

/// The `o x 15` node feature matrix.
pub fn node_features(inst: &Instance) -> Result<Mat> {
    let o = inst.num_ops();
    let mut x = Mat::zeros(o, NODE_FEATURES);
    let machine_q: Vec<(f64, f64, f64)> = (0..inst.num_machines())
        .map(|mc| {
            let durs: Vec<f64> = inst
                .machine_ops(mc)
                .iter()
                .map(|&i| inst.op(i).duration as f64)
                .collect();
            if durs.is_empty() {
                (0.0, 0.0, 0.0)
            } else {
                quartiles(&durs).expect("nonempty")
            }
        })
        .collect();

    for job in 0..inst.num_jobs() {
        let ops = inst.job_ops(job);
        if ops.is_empty() {
            continue;
        }
        let total = inst.job_total_duration(job) as f64;
        if total <= 0.0 {
            return Err(Error::InvalidInstance(format!(
                "job {job} has zero total duration"
            )));
        }
        let durs: Vec<f64> = ops.clone().map(|i| inst.op(i).duration as f64).collect();
        let jq = quartiles(&durs)?;
        let mut done = 0.0;
        for i in ops {
            let tau = inst.op(i).duration as f64;
            done += tau;
            let mq = machine_q[inst.op(i).machine];
            let row = x.row_mut(i);
            row[0] = tau / DURATION_SCALE;
            row[1] = done / total;
            row[2] = (total - done) / total;
            row[3] = jq.0 / DURATION_SCALE;
            row[4] = jq.1 / DURATION_SCALE;
            row[5] = jq.2 / DURATION_SCALE;
            row[6] = mq.0 / DURATION_SCALE;
            row[7] = mq.1 / DURATION_SCALE;
            row[8] = mq.2 / DURATION_SCALE;
            row[9] = (tau - jq.0) / DURATION_SCALE;
            row[10] = (tau - jq.1) / DURATION_SCALE;
            row[11] = (tau - jq.2) / DURATION_SCALE;
            row[12] = (tau - mq.0) / DURATION_SCALE;
            row[13] = (tau - mq.1) / DURATION_SCALE;
            row[14] = (tau - mq.2) / DURATION_SCALE;
        }
    }
    Ok(x)
}

/// Scratch buffers for [`context_features_into`], reusable across steps.
#[derive(Debug, Default, Clone)]
pub struct ContextScratch {
    jobs: Vec<f64>,
    sorted_jobs: Vec<f64>,
    machines: Vec<f64>,
}

/// The `n x 11` context matrix of a partial schedule.
pub fn context_features(s: &PartialSchedule<'_>) -> Mat {
    let n = s.instance().num_jobs();
    let mut out = Mat::zeros(n, CONTEXT_FEATURES);
    context_features_into(s, &mut ContextScratch::default(), out.as_mut_slice(), true);
    out
}

/// Context features before division by the partial makespan (ratio columns
/// hold the raw numerators).
pub fn raw_context_features(s: &PartialSchedule<'_>) -> Mat {
    let n = s.instance().num_jobs();
    let mut out = Mat::zeros(n, CONTEXT_FEATURES);
    context_features_into(s, &mut ContextScratch::default(), out.as_mut_slice(), false);
    out
}

/// Writes the row-major `n x 11` context features into `out`.
pub fn context_features_into(
    s: &PartialSchedule<'_>,
    scratch: &mut ContextScratch,
    out: &mut [f64],
    normalize: bool,
) {
    let inst = s.instance();
    let n = inst.num_jobs();
    debug_assert_eq!(out.len(), n * CONTEXT_FEATURES);

    scratch.jobs.clear();
    scratch.jobs.extend(s.job_ready().iter().map(|&c| c as f64));
    scratch.machines.clear();
    scratch
        .machines
        .extend(s.machine_ready().iter().map(|&c| c as f64));
    let job_mean = scratch.jobs.iter().sum::<f64>() / n as f64;
    let mach_mean = scratch.machines.iter().sum::<f64>() / scratch.machines.len() as f64;
    scratch.sorted_jobs.clear();
    scratch.sorted_jobs.extend_from_slice(&scratch.jobs);
    scratch.sorted_jobs.sort_by(f64::total_cmp);
    scratch.machines.sort_by(f64::total_cmp);
    let jq = sorted_quartiles(&scratch.sorted_jobs);
    let mq = sorted_quartiles(&scratch.machines);
    let scale = if normalize {
        1.0 / (s.makespan().max(1) as f64)
    } else {
        1.0
    };

    for (j, row) in out.chunks_exact_mut(CONTEXT_FEATURES).enumerate() {
        let Some(op) = s.ready_op(j) else {
            row.fill(0.0);
            continue;
        };
        let c_pred = scratch.jobs[j];
        let m_ready = s.machine_ready()[inst.op(op).machine] as f64;
        row[0] = (c_pred - m_ready) * scale;
        row[1] = c_pred * scale;
        row[2] = (c_pred - job_mean) * scale;
        row[3] = (c_pred - jq.0) * scale;
        row[4] = (c_pred - jq.1) * scale;
        row[5] = (c_pred - jq.2) * scale;
        row[6] = m_ready * scale;
        row[7] = (m_ready - mach_mean) * scale;
        row[8] = (m_ready - mq.0) * scale;
        row[9] = (m_ready - mq.1) * scale;
        row[10] = (m_ready - mq.2) * scale;
    }
}
