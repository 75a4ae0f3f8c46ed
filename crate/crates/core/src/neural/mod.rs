//! Fully connected sigmoid network trained with Adam on a mean squared
//! error loss.
//!
//! The network maps the `4T` normalized channel statistics of a sample to
//! `2T` power ratios in `(0, 1)`; [`decode_output`] scales them back to
//! source and relay powers.

mod adam;
mod codec;
mod mlp;
mod model;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use codec::{decode_output, encode_input, encode_label, Normalization};
pub use mlp::{
    flop_count, forward, forward_counted, gradients, init_mlp, mse_loss, sigmoid, Batch, Gradients, MlpParams,
    OpCounter,
};
pub use model::{Model, MODEL_MAGIC, MODEL_VERSION};

pub(crate) use mlp::Workspace;
