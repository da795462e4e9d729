//! Operation embeddings: `e = [x || ReLU(GAT2([x || ReLU(GAT1(x))]))]`.

use super::gat::{gat_backward, gat_forward, Combine, GatCache, Neighborhoods};
use super::mat::Mat;
use super::params::ModelParams;
use crate::error::Result;
use crate::features::node_features;
use crate::instance::Instance;

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    neighborhoods: Neighborhoods,
    gat1: GatCache,
    gat1_out: Mat,
    gat2: GatCache,
    gat2_out: Mat,
}

/// Embeddings (`o x h`) of all operations of `inst`.
pub fn encode(params: &ModelParams, inst: &Instance) -> Result<Mat> {
    Ok(encode_with_cache(params, inst)?.0)
}

pub fn encode_with_cache(params: &ModelParams, inst: &Instance) -> Result<(Mat, EncoderCache)> {
    let x = node_features(inst)?;
    let nb = Neighborhoods::from_graph(&inst.disjunctive_graph());
    encode_features(params, &x, nb)
}

pub(crate) fn encode_features(
    params: &ModelParams,
    x: &Mat,
    nb: Neighborhoods,
) -> Result<(Mat, EncoderCache)> {
    let slope = params.dims.leaky_slope;
    let (gat1_out, gat1) = gat_forward(&params.gat1, x, &nb, slope, Combine::Concat)?;
    let u = relu(&gat1_out);
    let (gat2_out, gat2) = gat_forward(&params.gat2, &x.hcat(&u), &nb, slope, Combine::Mean)?;
    let v = relu(&gat2_out);
    let embeddings = x.hcat(&v);
    Ok((
        embeddings,
        EncoderCache {
            neighborhoods: nb,
            gat1,
            gat1_out,
            gat2,
            gat2_out,
        },
    ))
}

fn relu(m: &Mat) -> Mat {
    let mut out = m.clone();
    for v in out.as_mut_slice() {
        *v = v.max(0.0);
    }
    out
}

fn relu_mask(upstream: &mut Mat, pre: &Mat) {
    for (g, &p) in upstream.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Back-propagates `d_embeddings` into the encoder parameter gradients.
pub fn encoder_backward(
    params: &ModelParams,
    grads: &mut ModelParams,
    cache: &EncoderCache,
    d_embeddings: &Mat,
) {
    let dims = params.dims;
    let slope = dims.leaky_slope;
    let mut dv = d_embeddings.cols_range(dims.in_node, dims.embed());
    relu_mask(&mut dv, &cache.gat2_out);
    let din2 = gat_backward(
        &params.gat2,
        &mut grads.gat2,
        &cache.gat2,
        &cache.neighborhoods,
        slope,
        Combine::Mean,
        &dv,
    );
    let mut du = din2.cols_range(dims.in_node, dims.gat2_in());
    relu_mask(&mut du, &cache.gat1_out);
    gat_backward(
        &params.gat1,
        &mut grads.gat1,
        &cache.gat1,
        &cache.neighborhoods,
        slope,
        Combine::Concat,
        &du,
    );
}
