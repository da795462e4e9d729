//! GATv2 attention layer over a fixed neighborhood structure.
//!
//! For head weights `(W_l, W_r, a)`:
//! `score(i, k) = a . LeakyReLU(W_l h_i + W_r h_k)` for `k` in `N(i)`,
//! `alpha(i, .) = softmax(score(i, .))`, `h'_i = sum_k alpha(i, k) W_r h_k`.

use super::mat::{axpy, dot, leaky_relu, leaky_relu_grad, Mat};
use super::params::GatHead;
use crate::error::{Error, Result};
use crate::instance::DisjunctiveGraph;

/// Compressed adjacency lists (self-loops included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Neighborhoods {
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for list in lists {
            indices.extend_from_slice(list);
            offsets.push(indices.len());
        }
        Self { offsets, indices }
    }

    pub fn from_graph(graph: &DisjunctiveGraph) -> Self {
        Self::from_lists(&graph.neighborhoods())
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.indices.len()
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Concat,
    Mean,
}

#[derive(Debug, Clone)]
struct HeadCache {
    left: Mat,
    right: Mat,
    /// Attention weights aligned with the flattened neighborhood lists.
    alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GatCache {
    input: Mat,
    heads: Vec<HeadCache>,
}

fn check_shapes(heads: &[GatHead], h: &Mat, nb: &Neighborhoods) -> Result<()> {
    if h.rows() != nb.num_vertices() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} vertices",
            h.rows(),
            nb.num_vertices()
        )));
    }
    for head in heads {
        if head.w_left.rows() != h.cols() || head.w_right.rows() != h.cols() {
            return Err(Error::Shape(format!(
                "GAT input width {} vs weight rows {}",
                h.cols(),
                head.w_left.rows()
            )));
        }
    }
    Ok(())
}

pub fn gat_forward(
    heads: &[GatHead],
    h: &Mat,
    nb: &Neighborhoods,
    slope: f64,
    combine: Combine,
) -> Result<(Mat, GatCache)> {
    check_shapes(heads, h, nb)?;
    let o = h.rows();
    let dim = heads.first().map_or(0, |hd| hd.w_left.cols());
    let out_cols = match combine {
        Combine::Concat => dim * heads.len(),
        Combine::Mean => dim,
    };
    let mut out = Mat::zeros(o, out_cols);
    let mut caches = Vec::with_capacity(heads.len());
    let mut pre = vec![0.0; dim];
    let mut acc = vec![0.0; dim];

    for (hi, head) in heads.iter().enumerate() {
        let left = h.matmul(&head.w_left);
        let right = h.matmul(&head.w_right);
        let attn = head.attn.as_slice();
        let mut alpha = vec![0.0; nb.num_edges()];
        for i in 0..o {
            let range = nb.range(i);
            let li = left.row(i);
            for (slot, &k) in range.clone().zip(nb.of(i)) {
                for ((p, &l), &r) in pre.iter_mut().zip(li).zip(right.row(k)) {
                    *p = leaky_relu(l + r, slope);
                }
                alpha[slot] = dot(attn, &pre);
            }
            super::mat::softmax_in_place(&mut alpha[range.clone()]);
            acc.fill(0.0);
            for (slot, &k) in range.zip(nb.of(i)) {
                axpy(alpha[slot], right.row(k), &mut acc);
            }
            let row = out.row_mut(i);
            match combine {
                Combine::Concat => row[hi * dim..(hi + 1) * dim].copy_from_slice(&acc),
                Combine::Mean => axpy(1.0 / heads.len() as f64, &acc, row),
            }
        }
        caches.push(HeadCache { left, right, alpha });
    }
    Ok((
        out,
        GatCache {
            input: h.clone(),
            heads: caches,
        },
    ))
}

/// Accumulates parameter gradients into `grads` and returns `dL/dh`.
pub fn gat_backward(
    heads: &[GatHead],
    grads: &mut [GatHead],
    cache: &GatCache,
    nb: &Neighborhoods,
    slope: f64,
    combine: Combine,
    dout: &Mat,
) -> Mat {
    let o = cache.input.rows();
    let dim = heads.first().map_or(0, |hd| hd.w_left.cols());
    let mut dinput = Mat::zeros(o, cache.input.cols());
    let mut dalpha = Vec::new();
    let mut dhead_out = vec![0.0; dim];

    for (hi, (head, hc)) in heads.iter().zip(&cache.heads).enumerate() {
        let grad = &mut grads[hi];
        let attn = head.attn.as_slice();
        let mut dleft = Mat::zeros(o, dim);
        let mut dright = Mat::zeros(o, dim);
        let mut dattn = vec![0.0; dim];
        for i in 0..o {
            match combine {
                Combine::Concat => {
                    dhead_out.copy_from_slice(&dout.row(i)[hi * dim..(hi + 1) * dim])
                }
                Combine::Mean => {
                    let k = 1.0 / heads.len() as f64;
                    for (d, &g) in dhead_out.iter_mut().zip(dout.row(i)) {
                        *d = k * g;
                    }
                }
            }
            let range = nb.range(i);
            let alpha = &hc.alpha[range.clone()];
            dalpha.clear();
            dalpha.extend(nb.of(i).iter().map(|&k| dot(&dhead_out, hc.right.row(k))));
            let weighted: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
            for (pos, &k) in nb.of(i).iter().enumerate() {
                axpy(alpha[pos], &dhead_out, dright.row_mut(k));
                let dscore = alpha[pos] * (dalpha[pos] - weighted);
                if dscore == 0.0 {
                    continue;
                }
                for c in 0..dim {
                    let p = hc.left.get(i, c) + hc.right.get(k, c);
                    dattn[c] += dscore * leaky_relu(p, slope);
                    let dp = dscore * attn[c] * leaky_relu_grad(p, slope);
                    dleft.row_mut(i)[c] += dp;
                    dright.row_mut(k)[c] += dp;
                }
            }
        }
        grad.w_left.add_t_matmul(&cache.input, &dleft);
        grad.w_right.add_t_matmul(&cache.input, &dright);
        axpy(1.0, &dattn, grad.attn.as_mut_slice());
        dinput.add_assign(&dleft.matmul_t(&head.w_left));
        dinput.add_assign(&dright.matmul_t(&head.w_right));
    }
    dinput
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{init_params, ModelDims};

    #[test]
    fn singleton_neighborhood_is_a_projection() {
        let p = init_params(2, ModelDims::default());
        let nb = Neighborhoods::from_lists(&[vec![0]]);
        let h = Mat::from_vec(1, 15, (0..15).map(|v| v as f64 / 10.0).collect());
        let (out, _) = gat_forward(&p.gat1, &h, &nb, 0.15, Combine::Concat).unwrap();
        for (hi, head) in p.gat1.iter().enumerate() {
            let proj = h.matmul(&head.w_right);
            assert_eq!(&out.row(0)[hi * 64..(hi + 1) * 64], proj.row(0));
        }
    }

    #[test]
    fn identical_neighbors_get_identical_outputs() {
        let p = init_params(5, ModelDims::default());
        let nb = Neighborhoods::from_lists(&[vec![0, 1], vec![0, 1]]);
        let row: Vec<f64> = (0..15).map(|v| (v as f64 * 0.37).sin()).collect();
        let h = Mat::from_vec(2, 15, [row.clone(), row].concat());
        let (out, _) = gat_forward(&p.gat1, &h, &nb, 0.15, Combine::Concat).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = init_params(5, ModelDims::default());
        let nb = Neighborhoods::from_lists(&[vec![0]]);
        let h = Mat::zeros(2, 15);
        assert!(gat_forward(&p.gat1, &h, &nb, 0.15, Combine::Concat).is_err());
        let h = Mat::zeros(1, 14);
        assert!(gat_forward(&p.gat1, &h, &nb, 0.15, Combine::Concat).is_err());
    }
}
