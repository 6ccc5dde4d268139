use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arch::SramConfig;

use super::MemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BufferRole {
    SpikeA,
    SpikeB,
    WeightA,
    WeightB,
    Membrane1,
    Membrane2,
    Temp,
    Boundary,
}

impl BufferRole {
    pub const ALL: [BufferRole; 8] = [
        BufferRole::SpikeA,
        BufferRole::SpikeB,
        BufferRole::WeightA,
        BufferRole::WeightB,
        BufferRole::Membrane1,
        BufferRole::Membrane2,
        BufferRole::Temp,
        BufferRole::Boundary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BufferRole::SpikeA => "spike-a",
            BufferRole::SpikeB => "spike-b",
            BufferRole::WeightA => "weight-a",
            BufferRole::WeightB => "weight-b",
            BufferRole::Membrane1 => "membrane-1",
            BufferRole::Membrane2 => "membrane-2",
            BufferRole::Temp => "temp",
            BufferRole::Boundary => "boundary",
        }
    }

    pub fn capacity(&self, sram: &SramConfig) -> u64 {
        match self {
            BufferRole::SpikeA | BufferRole::SpikeB => sram.spike_bytes,
            BufferRole::WeightA | BufferRole::WeightB => sram.weight_bytes,
            BufferRole::Membrane1 | BufferRole::Membrane2 => sram.membrane_bytes,
            BufferRole::Temp => sram.temp_bytes,
            BufferRole::Boundary => sram.boundary_bytes,
        }
    }

    /// Spike buffer used at time step `t`.
    pub fn spike(t: usize) -> BufferRole {
        if t.is_multiple_of(2) {
            BufferRole::SpikeA
        } else {
            BufferRole::SpikeB
        }
    }
}

impl fmt::Display for BufferRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One on-chip buffer with occupancy tracking and access counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferModel {
    pub role: BufferRole,
    pub capacity: u64,
    pub occupancy: u64,
    pub peak_occupancy: u64,
    pub reads: u64,
    pub writes: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
}

impl BufferModel {
    pub fn new(role: BufferRole, capacity: u64) -> Self {
        Self { role, capacity, occupancy: 0, peak_occupancy: 0, reads: 0, writes: 0, bytes_read: 0, bytes_written: 0 }
    }

    /// Replaces the contents with `bytes` of new data.
    pub fn write(&mut self, bytes: u64) -> Result<(), MemError> {
        if bytes > self.capacity {
            return Err(MemError::Capacity { buffer: self.role.name().to_string(), needed: bytes, capacity: self.capacity });
        }
        self.occupancy = bytes;
        self.peak_occupancy = self.peak_occupancy.max(bytes);
        self.writes += 1;
        self.bytes_written += bytes;
        Ok(())
    }

    pub fn read(&mut self, bytes: u64) {
        self.reads += 1;
        self.bytes_read += bytes;
    }

    pub fn clear(&mut self) {
        self.occupancy = 0;
    }
}
