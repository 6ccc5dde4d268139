//! DRAM traffic under tick batching and two-layer fusion.

use serde::{Deserialize, Serialize};

use crate::arch::HardwareConfig;
use crate::net::{AnnotatedNetwork, LayerKind};
use crate::snn::Shape3;

use super::MemError;

/// Bit-packed size of one spike map per step, times `time_steps`.
pub fn spike_map_bytes(shape: Shape3, time_steps: usize) -> u64 {
    (shape.len() as u64).div_ceil(8) * time_steps as u64
}

/// Sign-bit bytes plus per-channel bias and threshold at `param_byte_width` bytes each.
pub fn weight_bytes(out_channels: usize, in_channels: usize, kh: usize, kw: usize, param_byte_width: u32) -> u64 {
    sign_bytes(out_channels, in_channels, kh, kw) + out_channels as u64 * 2 * param_byte_width as u64
}

fn sign_bytes(out_channels: usize, in_channels: usize, kh: usize, kw: usize) -> u64 {
    ((out_channels * in_channels * kh * kw) as u64).div_ceil(8)
}

/// Storage view of one compute layer. A directly following 2x2 pooling layer is
/// absorbed: `output` is the pooled map that actually leaves the layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFootprint {
    /// Network layer index of the compute layer.
    pub index: usize,
    /// Network layer index whose output is stored (the absorbed pooling layer, if any).
    pub stored_index: usize,
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub input: Shape3,
    pub output: Shape3,
    pub sign_bytes: u64,
    pub param_bytes: u64,
}

impl LayerFootprint {
    pub fn weight_bytes(&self) -> u64 {
        self.sign_bytes + self.param_bytes
    }

    /// Shape of the conv output before any absorbed pooling.
    pub fn conv_output(&self) -> Shape3 {
        if self.stored_index == self.index {
            self.output
        } else {
            Shape3::new(self.output.channels, self.output.height * 2, self.output.width * 2)
        }
    }
}

pub fn footprints(net: &AnnotatedNetwork, param_byte_width: u32) -> Vec<LayerFootprint> {
    let mut out: Vec<LayerFootprint> = Vec::new();
    for layer in &net.layers {
        if layer.spec.kind == LayerKind::MaxPool2 {
            if let Some(prev) = out.last_mut() {
                prev.stored_index = layer.index;
                prev.output = layer.output;
            }
            continue;
        }
        let (kh, kw) = layer.spec.kernel;
        let (cout, cin) = (layer.spec.out_channels, layer.input.channels);
        out.push(LayerFootprint {
            index: layer.index,
            stored_index: layer.index,
            kind: layer.spec.kind,
            kernel: layer.spec.kernel,
            input: layer.input,
            output: layer.output,
            sign_bytes: sign_bytes(cout, cin, kh, kw),
            param_bytes: cout as u64 * 2 * param_byte_width as u64,
        });
    }
    out
}

/// Execution groups of compute layers, each one layer or two fused layers,
/// named by network layer index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionPlan {
    pub groups: Vec<Vec<usize>>,
}

impl FusionPlan {
    pub fn unfused(layers: &[LayerFootprint]) -> Self {
        Self { groups: layers.iter().map(|l| vec![l.index]).collect() }
    }

    pub fn is_fused(&self) -> bool {
        self.groups.iter().any(|g| g.len() == 2)
    }

    /// Checks the plan covers `layers` in order and that every pair fits on chip.
    pub fn check(&self, layers: &[LayerFootprint], cfg: &HardwareConfig) -> Result<(), MemError> {
        let flat: Vec<usize> = self.groups.iter().flatten().copied().collect();
        let want: Vec<usize> = layers.iter().map(|l| l.index).collect();
        if flat != want {
            return Err(MemError::Plan(format!("plan covers layers {flat:?}, network has compute layers {want:?}")));
        }
        let mut pos = 0;
        for g in &self.groups {
            match g.len() {
                1 => {}
                2 => {
                    if let Err(reason) = pair_fits(&layers[pos], &layers[pos + 1], cfg) {
                        return Err(MemError::PairDoesNotFit { first: g[0], second: g[1], reason });
                    }
                }
                n => return Err(MemError::Plan(format!("group {g:?} has {n} layers, expected 1 or 2"))),
            }
            pos += g.len();
        }
        Ok(())
    }
}

/// Bytes of one R-row strip of one step of a spike map: the granularity at
/// which a fused intermediate passes through the temp buffer.
pub fn strip_bytes(shape: Shape3, rows: usize) -> u64 {
    ((shape.channels * rows.min(shape.height) * shape.width) as u64).div_ceil(8)
}

/// Why two adjacent layers cannot run fused, if they cannot.
pub fn pair_fits(a: &LayerFootprint, b: &LayerFootprint, cfg: &HardwareConfig) -> Result<(), String> {
    if a.kind == LayerKind::EncodingConv {
        // The encoding layer keeps its convolution result in the second
        // membrane buffer, which the second fused layer would need.
        return Err("the encoding layer cannot be fused".into());
    }
    let half = cfg.sram.weight_bytes;
    for l in [a, b] {
        if l.weight_bytes() > half {
            return Err(format!("layer {} weights ({} B) exceed one weight buffer ({half} B)", l.index, l.weight_bytes()));
        }
    }
    let strip = strip_bytes(a.output, cfg.array_rows);
    if strip > cfg.sram.temp_bytes {
        return Err(format!("intermediate strip ({strip} B) exceeds the temp buffer ({} B)", cfg.sram.temp_bytes));
    }
    Ok(())
}

/// Greedy front-to-back pairing of adjacent eligible layers.
pub fn plan_fusion(layers: &[LayerFootprint], cfg: &HardwareConfig) -> FusionPlan {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < layers.len() {
        if i + 1 < layers.len() && pair_fits(&layers[i], &layers[i + 1], cfg).is_ok() {
            groups.push(vec![layers[i].index, layers[i + 1].index]);
            i += 2;
        } else {
            groups.push(vec![layers[i].index]);
            i += 1;
        }
    }
    FusionPlan { groups }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTraffic {
    pub index: usize,
    pub kind: LayerKind,
    pub sign_bytes_read: u64,
    pub param_bytes_read: u64,
    /// 8-bit image bytes for the encoding layer, spike bytes otherwise.
    pub input_bytes_read: u64,
    pub output_bytes_written: u64,
    pub fused_with_next: bool,
}

impl LayerTraffic {
    pub fn weight_bytes_read(&self) -> u64 {
        self.sign_bytes_read + self.param_bytes_read
    }

    pub fn total(&self) -> u64 {
        self.weight_bytes_read() + self.input_bytes_read + self.output_bytes_written
    }
}

/// Traffic split into named lines. `image + spike_read + spike_write +
/// conv_weight` is the subtotal of image, hidden-layer spike and conv weight
/// traffic; the classifier's spikes, fc weights and folded parameters are
/// listed separately so other accountings can be rebuilt from the lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficBreakdown {
    pub image_bytes: u64,
    pub spike_read_bytes: u64,
    pub spike_write_bytes: u64,
    pub classifier_spike_bytes: u64,
    pub conv_weight_bytes: u64,
    pub fc_weight_bytes: u64,
    pub param_bytes: u64,
}

impl TrafficBreakdown {
    pub fn conv_spike_subtotal(&self) -> u64 {
        self.image_bytes + self.spike_read_bytes + self.spike_write_bytes + self.conv_weight_bytes
    }

    pub fn total(&self) -> u64 {
        self.conv_spike_subtotal() + self.classifier_spike_bytes + self.fc_weight_bytes + self.param_bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficLedger {
    pub time_steps: usize,
    pub tick_batching: bool,
    pub layer_fusion: bool,
    pub plan: FusionPlan,
    pub layers: Vec<LayerTraffic>,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub total_bytes: u64,
    pub breakdown: TrafficBreakdown,
}

/// DRAM traffic of one inference. Weights are read once (tick batching keeps
/// them on chip across all steps); the image is read once at one byte per
/// value; every other layer reads its input maps and writes its output maps
/// for all steps, except that a fused intermediate never leaves the chip.
pub fn simulate_traffic(
    layers: &[LayerFootprint],
    plan: &FusionPlan,
    time_steps: usize,
    cfg: &HardwareConfig,
) -> Result<TrafficLedger, MemError> {
    plan.check(layers, cfg)?;
    let mut fused_next = vec![false; layers.len()];
    let mut pos = 0;
    for g in &plan.groups {
        if g.len() == 2 {
            fused_next[pos] = true;
        }
        pos += g.len();
    }
    let mut records = Vec::with_capacity(layers.len());
    let mut b = TrafficBreakdown::default();
    let last = layers.len().saturating_sub(1);
    for (i, l) in layers.iter().enumerate() {
        let input_bytes_read = match l.kind {
            LayerKind::EncodingConv => l.input.len() as u64,
            _ if i > 0 && fused_next[i - 1] => 0,
            _ => spike_map_bytes(l.input, time_steps),
        };
        let output_bytes_written = if fused_next[i] { 0 } else { spike_map_bytes(l.output, time_steps) };
        let r = LayerTraffic {
            index: l.index,
            kind: l.kind,
            sign_bytes_read: l.sign_bytes,
            param_bytes_read: l.param_bytes,
            input_bytes_read,
            output_bytes_written,
            fused_with_next: fused_next[i],
        };
        if l.kind == LayerKind::EncodingConv {
            b.image_bytes += input_bytes_read;
        } else if i == last {
            b.classifier_spike_bytes += input_bytes_read;
        } else {
            b.spike_read_bytes += input_bytes_read;
        }
        if i == last {
            b.classifier_spike_bytes += output_bytes_written;
        } else {
            b.spike_write_bytes += output_bytes_written;
        }
        if l.kind == LayerKind::Fc {
            b.fc_weight_bytes += l.sign_bytes;
        } else {
            b.conv_weight_bytes += l.sign_bytes;
        }
        b.param_bytes += l.param_bytes;
        records.push(r);
    }
    let dram_read_bytes = records.iter().map(|r| r.weight_bytes_read() + r.input_bytes_read).sum();
    let dram_write_bytes = records.iter().map(|r| r.output_bytes_written).sum();
    Ok(TrafficLedger {
        time_steps,
        tick_batching: true,
        layer_fusion: plan.is_fused(),
        plan: plan.clone(),
        layers: records,
        dram_read_bytes,
        dram_write_bytes,
        total_bytes: dram_read_bytes + dram_write_bytes,
        breakdown: b,
    })
}

/// Sum over fused pairs of twice the intermediate map's bytes.
pub fn fusion_savings(layers: &[LayerFootprint], plan: &FusionPlan, time_steps: usize) -> u64 {
    plan.groups
        .iter()
        .filter(|g| g.len() == 2)
        .filter_map(|g| layers.iter().find(|l| l.index == g[0]))
        .map(|l| 2 * spike_map_bytes(l.output, time_steps))
        .sum()
}

/// Percent of `before` removed in `after`.
pub fn percent_reduction(before: u64, after: u64) -> f64 {
    if before == 0 {
        0.0
    } else {
        100.0 * (before as f64 - after as f64) / before as f64
    }
}
