//! Graph-attention encoder, memory-network decoder and their gradients.

pub mod checkpoint;
pub mod decoder;
pub mod encoder;
pub mod gat;
pub mod mat;
pub mod params;
pub mod rollout;

pub use checkpoint::Checkpoint;
pub use decoder::{decode_step, decode_step_reference, DecoderPlan, JobPolicy, MASKED_LOGIT};
pub use encoder::encode;
pub use mat::Mat;
pub use params::{init_params, ModelDims, ModelParams};
pub use rollout::{rollout, sequence_log_prob, sequence_log_prob_grad, DecodeMode};
