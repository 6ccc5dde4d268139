//! On-chip buffers, tick batching, two-layer fusion and DRAM traffic.

mod buffer;
mod pingpong;
mod traffic;

use thiserror::Error;

pub use buffer::{BufferModel, BufferRole};
pub use pingpong::{pingpong_schedule, Access, DataTag, Location, PingpongTrace, TraceEvent};
pub use traffic::{
    footprints, fusion_savings, pair_fits, percent_reduction, plan_fusion, simulate_traffic, spike_map_bytes,
    strip_bytes, weight_bytes, FusionPlan, LayerFootprint, LayerTraffic, TrafficBreakdown, TrafficLedger,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("capacity fault: {buffer} needs {needed} B, holds {capacity} B")]
    Capacity { buffer: String, needed: u64, capacity: u64 },
    #[error("read before write: {0}")]
    ReadBeforeWrite(String),
    #[error("spike map {0} read from DRAM more than once")]
    RepeatedRead(String),
    #[error("functional mismatch: {0}")]
    Mismatch(String),
    #[error("invalid fusion plan: {0}")]
    Plan(String),
    #[error("layers {first} and {second} cannot be fused: {reason}")]
    PairDoesNotFit { first: usize, second: usize, reason: String },
}

impl MemError {
    /// Capacity faults, including fused pairs that do not fit on chip.
    pub fn is_capacity(&self) -> bool {
        matches!(self, MemError::Capacity { .. } | MemError::PairDoesNotFit { .. })
    }
}
