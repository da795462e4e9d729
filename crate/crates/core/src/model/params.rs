use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use crate::features::{CONTEXT_FEATURES, NODE_FEATURES};
use crate::rng;

/// Layer widths of the encoder-decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub in_node: usize,
    pub gat1_heads: usize,
    pub gat1_head_dim: usize,
    pub gat2_heads: usize,
    pub gat2_head_dim: usize,
    pub ctx_in: usize,
    pub mha_heads: usize,
    pub mha_head_dim: usize,
    pub w2_out: usize,
    pub clf_hidden: usize,
    pub leaky_slope: f64,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            in_node: NODE_FEATURES,
            gat1_heads: 3,
            gat1_head_dim: 64,
            gat2_heads: 3,
            gat2_head_dim: 128,
            ctx_in: CONTEXT_FEATURES,
            mha_heads: 3,
            mha_head_dim: 64,
            w2_out: 128,
            clf_hidden: 128,
            leaky_slope: 0.15,
        }
    }
}

impl ModelDims {
    /// A small configuration for gradient checks and fast tests.
    pub fn tiny() -> Self {
        Self {
            gat1_heads: 2,
            gat1_head_dim: 4,
            gat2_heads: 2,
            gat2_head_dim: 4,
            mha_heads: 2,
            mha_head_dim: 4,
            w2_out: 4,
            clf_hidden: 4,
            ..Self::default()
        }
    }

    /// Concatenated output width of the first GAT layer.
    pub fn gat1_out(&self) -> usize {
        self.gat1_heads * self.gat1_head_dim
    }

    /// Input width of the second GAT layer: `[x || GAT1]`.
    pub fn gat2_in(&self) -> usize {
        self.in_node + self.gat1_out()
    }

    /// Operation embedding width `h`.
    pub fn embed(&self) -> usize {
        self.in_node + self.gat2_head_dim
    }

    /// Width of the projected context, equal to the concatenated MHA output.
    pub fn w1_out(&self) -> usize {
        self.mha_heads * self.mha_head_dim
    }

    pub fn clf_in(&self) -> usize {
        self.embed() + self.w2_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    pub w_left: Mat,
    pub w_right: Mat,
    /// Attention vector stored as a `d x 1` column.
    pub attn: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhaHead {
    pub query: Mat,
    pub key: Mat,
    pub value: Mat,
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub gat1: Vec<GatHead>,
    pub gat2: Vec<GatHead>,
    pub w1: Mat,
    pub b1: Mat,
    pub mha: Vec<MhaHead>,
    pub w2: Mat,
    pub b2: Mat,
    pub clf_hidden: Mat,
    pub clf_hidden_bias: Mat,
    pub clf_out: Mat,
    pub clf_out_bias: Mat,
}

fn gat_heads(heads: usize, input: usize, dim: usize) -> Vec<GatHead> {
    (0..heads)
        .map(|_| GatHead {
            w_left: Mat::zeros(input, dim),
            w_right: Mat::zeros(input, dim),
            attn: Mat::zeros(dim, 1),
        })
        .collect()
}

impl ModelParams {
    /// All-zero parameters of the given shape.
    pub fn zeros(dims: ModelDims) -> Self {
        let w1_out = dims.w1_out();
        Self {
            dims,
            gat1: gat_heads(dims.gat1_heads, dims.in_node, dims.gat1_head_dim),
            gat2: gat_heads(dims.gat2_heads, dims.gat2_in(), dims.gat2_head_dim),
            w1: Mat::zeros(dims.ctx_in, w1_out),
            b1: Mat::zeros(1, w1_out),
            mha: (0..dims.mha_heads)
                .map(|_| MhaHead {
                    query: Mat::zeros(w1_out, dims.mha_head_dim),
                    key: Mat::zeros(w1_out, dims.mha_head_dim),
                    value: Mat::zeros(w1_out, dims.mha_head_dim),
                })
                .collect(),
            w2: Mat::zeros(w1_out, dims.w2_out),
            b2: Mat::zeros(1, dims.w2_out),
            clf_hidden: Mat::zeros(dims.clf_in(), dims.clf_hidden),
            clf_hidden_bias: Mat::zeros(1, dims.clf_hidden),
            clf_out: Mat::zeros(dims.clf_hidden, 1),
            clf_out_bias: Mat::zeros(1, 1),
        }
    }

    /// Named tensors in a fixed canonical order.
    pub fn named(&self) -> Vec<(String, &Mat)> {
        let mut out: Vec<(String, &Mat)> = Vec::new();
        for (layer, heads) in [("gat1", &self.gat1), ("gat2", &self.gat2)] {
            for (h, head) in heads.iter().enumerate() {
                out.push((format!("{layer}.head{h}.w_left"), &head.w_left));
                out.push((format!("{layer}.head{h}.w_right"), &head.w_right));
                out.push((format!("{layer}.head{h}.attn"), &head.attn));
            }
        }
        out.push(("mem.w1".into(), &self.w1));
        out.push(("mem.b1".into(), &self.b1));
        for (h, head) in self.mha.iter().enumerate() {
            out.push((format!("mem.mha.head{h}.query"), &head.query));
            out.push((format!("mem.mha.head{h}.key"), &head.key));
            out.push((format!("mem.mha.head{h}.value"), &head.value));
        }
        out.push(("mem.w2".into(), &self.w2));
        out.push(("mem.b2".into(), &self.b2));
        out.push(("clf.hidden.weight".into(), &self.clf_hidden));
        out.push(("clf.hidden.bias".into(), &self.clf_hidden_bias));
        out.push(("clf.out.weight".into(), &self.clf_out));
        out.push(("clf.out.bias".into(), &self.clf_out_bias));
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut out: Vec<&mut Mat> = Vec::new();
        for heads in [&mut self.gat1, &mut self.gat2] {
            for head in heads.iter_mut() {
                out.push(&mut head.w_left);
                out.push(&mut head.w_right);
                out.push(&mut head.attn);
            }
        }
        out.push(&mut self.w1);
        out.push(&mut self.b1);
        for head in self.mha.iter_mut() {
            out.push(&mut head.query);
            out.push(&mut head.key);
            out.push(&mut head.value);
        }
        out.push(&mut self.w2);
        out.push(&mut self.b2);
        out.push(&mut self.clf_hidden);
        out.push(&mut self.clf_hidden_bias);
        out.push(&mut self.clf_out);
        out.push(&mut self.clf_out_bias);
        out
    }

    pub fn tensors(&self) -> Vec<&Mat> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn add_scaled(&mut self, other: &ModelParams, k: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += k * y;
            }
        }
    }
}

/// Is this tensor a bias (zero-initialized)?
pub fn is_bias(name: &str) -> bool {
    name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".bias")
}

/// Glorot-uniform weights with bound `sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_params(seed: u64, dims: ModelDims) -> ModelParams {
    let mut params = ModelParams::zeros(dims);
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    for (idx, (name, tensor)) in names.iter().zip(params.tensors_mut()).enumerate() {
        if is_bias(name) {
            continue;
        }
        let mut rng = rng::stream(seed, idx as u64);
        let bound = glorot_bound(tensor.rows(), tensor.cols());
        for v in tensor.as_mut_slice() {
            *v = rng.gen_range(-bound..bound);
        }
    }
    params
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
