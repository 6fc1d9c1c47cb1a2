//! A small neural-network kernel: the convolutional encoder, actor and
//! critic MLPs, a Gaussian policy head and checkpoint files.
//!
//! Parameters live in one flat `f32` vector described by a layer table.
//! Every kernel is generic over [`Scalar`] so tests can run the same code in
//! `f64`.

mod checkpoint;
mod layers;
mod network;
mod policy;
mod scalar;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION};
pub use layers::{relu, relu_backward, Conv2d, Dense};
pub use network::{ConvSpec, EncoderSpec, Forward, Inputs, LayerEntry, Network, NetworkSpec, OutputGrads};
pub use policy::{clip_action, deterministic_action, gaussian_entropy, gaussian_log_prob, sample_action, ActionSample};
pub use scalar::{gemm, Scalar, View};
