//! Bit-exact reference model of binary-weight SNN inference.
//!
//! Everything here is written for clarity rather than speed: plain nested
//! loops over dense tensors. The accelerator model in [`crate::arch`] is
//! checked against these functions.

mod bn;
mod conv;
mod network;
mod neuron;
mod tensor;

use thiserror::Error;

use crate::fixed::FixedOverflow;

pub use bn::{fold_bn, fold_bn_scaled, unfolded_bn_spikes, BnParams, FoldedChannel, FoldedNeuronParams, DEFAULT_BN_EPS};
pub use conv::{conv2d_oracle, maxpool2_oracle, Padding};
pub use network::{run_network_oracle, NetworkRun};
pub use neuron::{if_step, FireRule, MembraneState};
pub use tensor::{BinaryWeightTensor, ImageTensor, IntMap, Shape3, SpikeMap, SpikeTrain};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SnnError {
    #[error(transparent)]
    Overflow(#[from] FixedOverflow),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("2x2 pooling needs even dimensions, got {height}x{width}")]
    OddDimensions { height: usize, width: usize },
}
