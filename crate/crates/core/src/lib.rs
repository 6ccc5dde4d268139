//! Functional and cycle-approximate simulator of a reconfigurable vectorwise
//! binary-weight spiking neural network accelerator.
//!
//! * [`snn`] is the bit-exact reference model (IF neurons, batch-norm folding,
//!   brute-force convolution and pooling).
//! * [`arch`] models the datapath: PE arrays, PE blocks, the three-stage
//!   accumulator, boundary stitching and the bitplane encoding layer.
//! * [`mem`] models on-chip buffers, tick batching, two-layer fusion and DRAM traffic.
//! * [`net`] holds network descriptions, presets and model bundle I/O.

pub mod arch;
pub mod bits;
pub mod fixed;
pub mod mem;
pub mod net;
pub mod snn;
