//! Cycle-approximate model of the vectorwise datapath.
//!
//! Each PE block owns one input lane (a spike channel, or one bitplane of an
//! 8-bit channel in the encoding layer) and holds `kw` PE arrays, array `a`
//! loaded with filter column `a`. Input columns stream through the block one
//! per cycle; once `kw - 1` warmup cycles have filled the arrays, every cycle
//! completes one output column of one output channel. Tiles taller than the
//! array are stitched through the boundary buffer.

mod accum;
mod config;
mod engine;
mod if_unit;
mod pe;
mod postprocess;
mod schedule;

use thiserror::Error;

use crate::snn::SnnError;

pub use accum::{accumulate_stage1, accumulate_tree, AccumMode, GroupState};
pub use config::{peak_gops, HardwareConfig, SramConfig};
pub use engine::{run_network_engine, EngineRun, LayerCycles};
pub use if_unit::IfUnit;
pub use pe::{pe_multiply, PeArray, PeProduct};
pub use postprocess::or_pool2;
pub use schedule::{
    estimate_conv_cycles, estimate_encoding_cycles, schedule_conv_layer, schedule_encoding_layer, BoundaryStats,
    ConvPass, CycleReport, TileBoundary,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArchError {
    #[error("invalid hardware configuration: {0}")]
    Config(String),
    #[error("{kh}x{kw} kernel does not fit {rows}x{cols} arrays with {arrays} arrays per block")]
    KernelTooLarge { kh: usize, kw: usize, rows: usize, cols: usize, arrays: usize },
    #[error("vector length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{blocks} block outputs exceed the {max} PE blocks")]
    TooManyBlocks { blocks: usize, max: usize },
    #[error("accumulator emitted after {seen} of {expected} channel groups")]
    EmitBeforeLastGroup { seen: usize, expected: usize },
    #[error("accumulator received more than {expected} channel groups")]
    TooManyGroups { expected: usize },
    #[error("boundary entry for channel {channel}, column {column}, tile {tile}: {problem}")]
    Boundary { channel: usize, column: usize, tile: usize, problem: &'static str },
    #[error("{0} boundary entries left unconsumed at layer end")]
    BoundaryNotEmpty(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Snn(#[from] SnnError),
}

impl From<crate::fixed::FixedOverflow> for ArchError {
    fn from(e: crate::fixed::FixedOverflow) -> Self {
        ArchError::Snn(SnnError::Overflow(e))
    }
}
