//! Job-selection policy: memory network plus classifier.
//!
//! With context rows `c_j` and `q_j = c_j W1 + b1`:
//!
//! ```text
//! s_j = ReLU((q_j + MHA_j(q)) W2 + b2)
//! z_j = w_o . LeakyReLU([e_{o(t,j)} || s_j] W_c + b_c) + b_o
//! p   = softmax(z), completed jobs masked out
//! ```
//!
//! Two evaluations are provided. [`reference_forward`]/[`reference_backward`]
//! follow the formula layer by layer and carry a cache for gradients.
//! [`DecoderPlan`] folds every linear map that acts on the 11-wide context
//! into small precomputed matrices, which makes sampling several times
//! cheaper; it is algebraically identical and has no gradient support.

use super::mat::{axpy, dot, leaky_relu, leaky_relu_grad, softmax_in_place, vec_mat, Mat};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::features::{context_features, context_features_into, ContextScratch, CONTEXT_FEATURES};
use crate::schedule::PartialSchedule;

/// Logit assigned to completed jobs.
pub const MASKED_LOGIT: f64 = -1e9;

/// Scores and probabilities over all jobs at one decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct JobPolicy {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl JobPolicy {
    fn from_logits(logits: Vec<f64>) -> Self {
        let mut probs = logits.clone();
        softmax_in_place(&mut probs);
        Self { logits, probs }
    }

    /// Most probable job; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = j;
            }
        }
        best
    }
}

/// Row index into the embeddings used for each job: the ready operation, or
/// the job's last operation once it is complete (its logit is masked).
pub(crate) fn ready_rows(s: &PartialSchedule<'_>) -> (Vec<usize>, Vec<bool>) {
    let inst = s.instance();
    (0..inst.num_jobs())
        .map(|j| match s.ready_op(j) {
            Some(op) => (op, false),
            None => (inst.job_start(j) + inst.job_len(j).saturating_sub(1), true),
        })
        .unzip()
}

/// Intermediate values of one reference decoder evaluation.
#[derive(Debug, Clone)]
pub struct DecoderCache {
    ctx: Mat,
    q: Mat,
    heads: Vec<(Mat, Mat, Mat, Mat)>,
    resid: Mat,
    pre_state: Mat,
    cls_in: Mat,
    cls_pre: Mat,
    cls_act: Mat,
    ready: Vec<usize>,
    done: Vec<bool>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

fn add_bias(m: &mut Mat, bias: &Mat) {
    for r in 0..m.rows() {
        axpy(1.0, bias.as_slice(), m.row_mut(r));
    }
}

fn transpose(m: &Mat) -> Mat {
    let mut t = Mat::zeros(m.cols(), m.rows());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            t.set(c, r, m.get(r, c));
        }
    }
    t
}

/// Layer-by-layer decoder evaluation on explicit inputs.
pub fn reference_forward(
    params: &ModelParams,
    emb: &Mat,
    ctx: &Mat,
    ready: &[usize],
    done: &[bool],
) -> Result<DecoderCache> {
    let dims = params.dims;
    let n = ctx.rows();
    if ctx.cols() != dims.ctx_in || ready.len() != n || done.len() != n {
        return Err(Error::Shape(format!(
            "context {}x{} for {} jobs",
            ctx.rows(),
            ctx.cols(),
            ready.len()
        )));
    }
    if emb.cols() != dims.embed() {
        return Err(Error::Shape(format!(
            "embedding width {} vs {}",
            emb.cols(),
            dims.embed()
        )));
    }
    let scale = 1.0 / (dims.mha_head_dim as f64).sqrt();

    let mut q = ctx.matmul(&params.w1);
    add_bias(&mut q, &params.b1);
    let mut resid = q.clone();
    let mut heads = Vec::with_capacity(dims.mha_heads);
    for (h, head) in params.mha.iter().enumerate() {
        let qh = q.matmul(&head.query);
        let kh = q.matmul(&head.key);
        let vh = q.matmul(&head.value);
        let mut attn = qh.matmul_t(&kh);
        attn.scale(scale);
        for r in 0..n {
            softmax_in_place(attn.row_mut(r));
        }
        let out = attn.matmul(&vh);
        let block = h * dims.mha_head_dim;
        for r in 0..n {
            axpy(
                1.0,
                out.row(r),
                &mut resid.row_mut(r)[block..block + dims.mha_head_dim],
            );
        }
        heads.push((qh, kh, vh, attn));
    }
    let mut pre_state = resid.matmul(&params.w2);
    add_bias(&mut pre_state, &params.b2);

    let mut cls_in = Mat::zeros(n, dims.clf_in());
    for j in 0..n {
        let row = cls_in.row_mut(j);
        row[..dims.embed()].copy_from_slice(emb.row(ready[j]));
        for (dst, &v) in row[dims.embed()..].iter_mut().zip(pre_state.row(j)) {
            *dst = v.max(0.0);
        }
    }
    let mut cls_pre = cls_in.matmul(&params.clf_hidden);
    add_bias(&mut cls_pre, &params.clf_hidden_bias);
    let mut cls_act = cls_pre.clone();
    for v in cls_act.as_mut_slice() {
        *v = leaky_relu(*v, dims.leaky_slope);
    }
    let out_w = params.clf_out.as_slice();
    let out_b = params.clf_out_bias.as_slice()[0];
    let logits: Vec<f64> = (0..n)
        .map(|j| {
            if done[j] {
                MASKED_LOGIT
            } else {
                dot(cls_act.row(j), out_w) + out_b
            }
        })
        .collect();
    let mut probs = logits.clone();
    softmax_in_place(&mut probs);
    Ok(DecoderCache {
        ctx: ctx.clone(),
        q,
        heads,
        resid,
        pre_state,
        cls_in,
        cls_pre,
        cls_act,
        ready: ready.to_vec(),
        done: done.to_vec(),
        logits,
        probs,
    })
}

/// Back-propagates `dlogits` (gradient w.r.t. the unmasked logits) into
/// `grads`, adding embedding gradients to `d_emb`.
pub fn reference_backward(
    params: &ModelParams,
    grads: &mut ModelParams,
    cache: &DecoderCache,
    dlogits: &[f64],
    d_emb: &mut Mat,
) {
    let dims = params.dims;
    let n = cache.ctx.rows();
    let scale = 1.0 / (dims.mha_head_dim as f64).sqrt();

    let out_w = params.clf_out.as_slice();
    let mut dcls_pre = Mat::zeros(n, dims.clf_hidden);
    for j in 0..n {
        let dz = if cache.done[j] { 0.0 } else { dlogits[j] };
        if dz == 0.0 {
            continue;
        }
        grads.clf_out_bias.as_mut_slice()[0] += dz;
        axpy(dz, cache.cls_act.row(j), grads.clf_out.as_mut_slice());
        let row = dcls_pre.row_mut(j);
        for ((d, &w), &p) in row.iter_mut().zip(out_w).zip(cache.cls_pre.row(j)) {
            *d = dz * w * leaky_relu_grad(p, dims.leaky_slope);
        }
    }
    grads.clf_hidden.add_t_matmul(&cache.cls_in, &dcls_pre);
    for j in 0..n {
        axpy(1.0, dcls_pre.row(j), grads.clf_hidden_bias.as_mut_slice());
    }
    let dcls_in = dcls_pre.matmul_t(&params.clf_hidden);

    let mut dpre_state = Mat::zeros(n, dims.w2_out);
    for j in 0..n {
        let row = dcls_in.row(j);
        axpy(1.0, &row[..dims.embed()], d_emb.row_mut(cache.ready[j]));
        for ((d, &g), &p) in dpre_state
            .row_mut(j)
            .iter_mut()
            .zip(&row[dims.embed()..])
            .zip(cache.pre_state.row(j))
        {
            *d = if p > 0.0 { g } else { 0.0 };
        }
    }
    grads.w2.add_t_matmul(&cache.resid, &dpre_state);
    for j in 0..n {
        axpy(1.0, dpre_state.row(j), grads.b2.as_mut_slice());
    }
    let dresid = dpre_state.matmul_t(&params.w2);

    let mut dq = dresid.clone();
    for (h, (head, (qh, kh, vh, attn))) in params.mha.iter().zip(&cache.heads).enumerate() {
        let block = h * dims.mha_head_dim;
        let dout = dresid.cols_range(block, block + dims.mha_head_dim);
        let mut dattn = dout.matmul_t(vh);
        let dvh = transpose(attn).matmul(&dout);
        for r in 0..n {
            let a = attn.row(r);
            let da = dattn.row_mut(r);
            let weighted = dot(a, da);
            for (d, &ai) in da.iter_mut().zip(a) {
                *d = ai * (*d - weighted) * scale;
            }
        }
        let dqh = dattn.matmul(kh);
        let dkh = transpose(&dattn).matmul(qh);
        let g = &mut grads.mha[h];
        g.query.add_t_matmul(&cache.q, &dqh);
        g.key.add_t_matmul(&cache.q, &dkh);
        g.value.add_t_matmul(&cache.q, &dvh);
        dq.add_assign(&dqh.matmul_t(&head.query));
        dq.add_assign(&dkh.matmul_t(&head.key));
        dq.add_assign(&dvh.matmul_t(&head.value));
    }
    grads.w1.add_t_matmul(&cache.ctx, &dq);
    for j in 0..n {
        axpy(1.0, dq.row(j), grads.b1.as_mut_slice());
    }
}

/// Decoder parameters folded for fast, gradient-free evaluation.
#[derive(Debug, Clone)]
pub struct DecoderPlan {
    n_heads: usize,
    /// Per head: bilinear form on `[c, 1]` giving scaled attention scores.
    score: Vec<Mat>,
    /// Per head: `[c, 1]` to the head's contribution to the state pre-activation.
    value: Vec<Mat>,
    /// `[c, 1]` to the residual part of the state pre-activation (includes `b2`).
    resid: Mat,
    cls_embed: Mat,
    cls_bias: Vec<f64>,
    cls_state: Mat,
    out_w: Vec<f64>,
    out_b: f64,
    slope: f64,
}

/// Reusable buffers for [`DecoderPlan`] evaluation.
#[derive(Debug, Default, Clone)]
pub struct DecodeScratch {
    ctx: ContextScratch,
    ctx_aug: Vec<f64>,
    projected: Vec<f64>,
    scores: Vec<f64>,
    mixed: Vec<f64>,
    state: Vec<f64>,
    hidden: Vec<f64>,
}

const AUG: usize = CONTEXT_FEATURES + 1;

impl DecoderPlan {
    pub fn new(params: &ModelParams) -> Self {
        let dims = params.dims;
        let scale = 1.0 / (dims.mha_head_dim as f64).sqrt();
        let w1a = params.w1.vcat_bias(params.b1.as_slice());
        let mut score = Vec::with_capacity(dims.mha_heads);
        let mut value = Vec::with_capacity(dims.mha_heads);
        for (h, head) in params.mha.iter().enumerate() {
            let qa = w1a.matmul(&head.query);
            let ka = w1a.matmul(&head.key);
            let mut s = qa.matmul_t(&ka);
            s.scale(scale);
            score.push(s);
            let block = h * dims.mha_head_dim;
            let w2_block = params.w2.rows_range(block, block + dims.mha_head_dim);
            value.push(w1a.matmul(&head.value).matmul(&w2_block));
        }
        let mut resid = w1a.matmul(&params.w2);
        axpy(1.0, params.b2.as_slice(), resid.row_mut(AUG - 1));
        Self {
            n_heads: dims.mha_heads,
            score,
            value,
            resid,
            cls_embed: params.clf_hidden.rows_range(0, dims.embed()),
            cls_bias: params.clf_hidden_bias.as_slice().to_vec(),
            cls_state: params.clf_hidden.rows_range(dims.embed(), dims.clf_in()),
            out_w: params.clf_out.as_slice().to_vec(),
            out_b: params.clf_out_bias.as_slice()[0],
            slope: dims.leaky_slope,
        }
    }

    /// Classifier pre-activation contributed by each operation embedding,
    /// bias included. Computed once per instance.
    pub fn embed_projection(&self, emb: &Mat) -> Mat {
        let mut out = emb.matmul(&self.cls_embed);
        for r in 0..out.rows() {
            axpy(1.0, &self.cls_bias, out.row_mut(r));
        }
        out
    }

    /// Logits for a group of schedules over the same instance. Row-wise
    /// arithmetic makes each schedule's result independent of the others.
    pub fn logits_batch(
        &self,
        schedules: &[&PartialSchedule<'_>],
        embed_proj: &Mat,
        scratch: &mut DecodeScratch,
    ) -> Vec<Vec<f64>> {
        let Some(first) = schedules.first() else {
            return Vec::new();
        };
        let n = first.instance().num_jobs();
        let rows = n * schedules.len();
        let state_dim = self.resid.cols();
        let hidden_dim = self.cls_state.cols();

        scratch.ctx_aug.resize(rows * AUG, 0.0);
        let mut ctx = vec![0.0; n * CONTEXT_FEATURES];
        for (b, s) in schedules.iter().enumerate() {
            context_features_into(s, &mut scratch.ctx, &mut ctx, true);
            for j in 0..n {
                let dst = &mut scratch.ctx_aug[(b * n + j) * AUG..(b * n + j + 1) * AUG];
                dst[..CONTEXT_FEATURES]
                    .copy_from_slice(&ctx[j * CONTEXT_FEATURES..(j + 1) * CONTEXT_FEATURES]);
                dst[CONTEXT_FEATURES] = 1.0;
            }
        }

        scratch.state.resize(rows * state_dim, 0.0);
        for r in 0..rows {
            vec_mat(
                &scratch.ctx_aug[r * AUG..(r + 1) * AUG],
                &self.resid,
                &mut scratch.state[r * state_dim..(r + 1) * state_dim],
            );
        }
        scratch.projected.resize(rows * AUG, 0.0);
        scratch.mixed.resize(rows * AUG, 0.0);
        scratch.scores.resize(n, 0.0);
        for h in 0..self.n_heads {
            for r in 0..rows {
                vec_mat(
                    &scratch.ctx_aug[r * AUG..(r + 1) * AUG],
                    &self.score[h],
                    &mut scratch.projected[r * AUG..(r + 1) * AUG],
                );
            }
            for b in 0..schedules.len() {
                let group = &scratch.ctx_aug[b * n * AUG..(b + 1) * n * AUG];
                for j in 0..n {
                    let r = b * n + j;
                    let pj = &scratch.projected[r * AUG..(r + 1) * AUG];
                    for (k, sc) in scratch.scores.iter_mut().enumerate() {
                        *sc = dot(pj, &group[k * AUG..(k + 1) * AUG]);
                    }
                    softmax_in_place(&mut scratch.scores);
                    let mix = &mut scratch.mixed[r * AUG..(r + 1) * AUG];
                    mix.fill(0.0);
                    for (k, &a) in scratch.scores.iter().enumerate() {
                        axpy(a, &group[k * AUG..(k + 1) * AUG], mix);
                    }
                }
            }
            let mut contrib = vec![0.0; state_dim];
            for r in 0..rows {
                vec_mat(
                    &scratch.mixed[r * AUG..(r + 1) * AUG],
                    &self.value[h],
                    &mut contrib,
                );
                axpy(
                    1.0,
                    &contrib,
                    &mut scratch.state[r * state_dim..(r + 1) * state_dim],
                );
            }
        }
        for v in scratch.state.iter_mut() {
            *v = v.max(0.0);
        }

        scratch.hidden.resize(hidden_dim, 0.0);
        let mut out = Vec::with_capacity(schedules.len());
        for (b, s) in schedules.iter().enumerate() {
            let mut logits = vec![MASKED_LOGIT; n];
            for (j, z) in logits.iter_mut().enumerate() {
                let Some(op) = s.ready_op(j) else { continue };
                let r = b * n + j;
                vec_mat(
                    &scratch.state[r * state_dim..(r + 1) * state_dim],
                    &self.cls_state,
                    &mut scratch.hidden,
                );
                let mut acc = self.out_b;
                for ((&hv, &ev), &w) in scratch
                    .hidden
                    .iter()
                    .zip(embed_proj.row(op))
                    .zip(&self.out_w)
                {
                    acc += w * leaky_relu(hv + ev, self.slope);
                }
                *z = acc;
            }
            out.push(logits);
        }
        out
    }

    pub fn policy(
        &self,
        s: &PartialSchedule<'_>,
        embed_proj: &Mat,
        scratch: &mut DecodeScratch,
    ) -> JobPolicy {
        let logits = self.logits_batch(&[s], embed_proj, scratch).pop().unwrap();
        JobPolicy::from_logits(logits)
    }
}

/// Job probabilities at the current step of `s`, given operation embeddings.
pub fn decode_step(params: &ModelParams, emb: &Mat, s: &PartialSchedule<'_>) -> Result<JobPolicy> {
    if s.is_complete() {
        return Err(Error::ScheduleComplete);
    }
    if emb.rows() != s.instance().num_ops() || emb.cols() != params.dims.embed() {
        return Err(Error::Shape(format!(
            "embeddings {}x{} for {} operations",
            emb.rows(),
            emb.cols(),
            s.instance().num_ops()
        )));
    }
    let plan = DecoderPlan::new(params);
    let proj = plan.embed_projection(emb);
    Ok(plan.policy(s, &proj, &mut DecodeScratch::default()))
}

/// Same as [`decode_step`] but through the layer-by-layer reference path.
pub fn decode_step_reference(
    params: &ModelParams,
    emb: &Mat,
    s: &PartialSchedule<'_>,
) -> Result<JobPolicy> {
    if s.is_complete() {
        return Err(Error::ScheduleComplete);
    }
    let (ready, done) = ready_rows(s);
    let cache = reference_forward(params, emb, &context_features(s), &ready, &done)?;
    Ok(JobPolicy {
        logits: cache.logits,
        probs: cache.probs,
    })
}
