use serde::{Deserialize, Serialize};

use crate::fixed::QFormat;

use super::ArchError;

const KB: u64 = 1024;

/// On-chip SRAM capacities in bytes. Paired buffers give the size of each half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SramConfig {
    pub spike_bytes: u64,
    pub weight_bytes: u64,
    pub membrane_bytes: u64,
    pub temp_bytes: u64,
    pub boundary_bytes: u64,
}

impl Default for SramConfig {
    /// 230.3125 KB in total.
    fn default() -> Self {
        Self {
            spike_bytes: 22 * KB,
            weight_bytes: 74 * KB,
            membrane_bytes: 16 * KB,
            temp_bytes: 4 * KB,
            boundary_bytes: 2 * KB + 320,
        }
    }
}

impl SramConfig {
    pub fn total_bytes(&self) -> u64 {
        2 * self.spike_bytes + 2 * self.weight_bytes + 2 * self.membrane_bytes + self.temp_bytes + self.boundary_bytes
    }
}

/// Datapath geometry, clock and storage of the accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub pe_blocks: usize,
    pub arrays_per_block: usize,
    /// PE rows per array: length of the broadcast input column.
    pub array_rows: usize,
    /// PE columns per array: length of the broadcast weight column.
    pub array_cols: usize,
    pub clock_hz: f64,
    /// Input channels processed per pass of a spiking layer.
    pub group_size: usize,
    pub total_bits: u32,
    pub frac_bits: u32,
    /// Pipeline stages of the accumulator, reported as latency per pass.
    pub accumulator_stages: u64,
    pub sram: SramConfig,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            pe_blocks: 32,
            arrays_per_block: 3,
            array_rows: 8,
            array_cols: 3,
            clock_hz: 500e6,
            group_size: 32,
            total_bits: 24,
            frac_bits: 8,
            accumulator_stages: 3,
            sram: SramConfig::default(),
        }
    }
}

impl HardwareConfig {
    pub fn pe_count(&self) -> usize {
        self.pe_blocks * self.arrays_per_block * self.array_rows * self.array_cols
    }

    pub fn pes_per_block(&self) -> usize {
        self.arrays_per_block * self.array_rows * self.array_cols
    }

    pub fn format(&self) -> QFormat {
        QFormat::new(self.total_bits, self.frac_bits)
    }

    /// Input channels that share one encoding-layer pass: eight bitplane
    /// blocks per channel.
    pub fn encoding_channels_per_pass(&self) -> usize {
        self.pe_blocks / 8
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        let bad = |m: &str| Err(ArchError::Config(m.to_string()));
        if self.pe_blocks == 0 || self.arrays_per_block == 0 || self.array_rows == 0 || self.array_cols == 0 {
            return bad("PE geometry must be non-zero");
        }
        if self.group_size == 0 || self.group_size > self.pe_blocks {
            return bad("group_size must be in 1..=pe_blocks");
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return bad("clock_hz must be positive");
        }
        if !(2..=48).contains(&self.total_bits) || self.frac_bits >= self.total_bits {
            return bad("fixed-point format must have 2..=48 bits and fewer fractional bits");
        }
        Ok(())
    }
}

/// Peak throughput in GOPS: every PE does a multiply and an add per cycle.
pub fn peak_gops(cfg: &HardwareConfig) -> f64 {
    cfg.pe_count() as f64 * 2.0 * cfg.clock_hz / 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let cfg = HardwareConfig::default();
        assert_eq!(cfg.pe_count(), 2304);
        assert_eq!(cfg.encoding_channels_per_pass(), 4);
        assert_eq!(cfg.sram.total_bytes() * 10_000 / 1024, 2_303_125);
        cfg.validate().unwrap();
    }

    #[test]
    fn peak_throughput() {
        assert_eq!(peak_gops(&HardwareConfig::default()), 2304.0);
        let one = HardwareConfig { pe_blocks: 1, arrays_per_block: 1, array_rows: 1, array_cols: 1, group_size: 1, clock_hz: 1e9, ..Default::default() };
        assert_eq!(peak_gops(&one), 2.0);
        let small = HardwareConfig { pe_blocks: 128, arrays_per_block: 1, array_rows: 1, array_cols: 1, clock_hz: 200e6, ..Default::default() };
        assert!((peak_gops(&small) - 51.2).abs() < 1e-9);
        let half = HardwareConfig { clock_hz: 250e6, ..Default::default() };
        assert_eq!(peak_gops(&half), 1152.0);
    }

    #[test]
    fn invalid_configs() {
        assert!(HardwareConfig { group_size: 33, ..Default::default() }.validate().is_err());
        assert!(HardwareConfig { array_rows: 0, ..Default::default() }.validate().is_err());
        assert!(HardwareConfig { clock_hz: 0.0, ..Default::default() }.validate().is_err());
    }
}
