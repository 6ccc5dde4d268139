//! Report records and their JSON, CSV and text renderings.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use vsa_core::arch::{peak_gops, CycleReport, EngineRun, HardwareConfig};
use vsa_core::mem::{
    fusion_savings, percent_reduction, BufferModel, FusionPlan, LayerFootprint, PingpongTrace, TrafficBreakdown,
    TrafficLedger,
};
use vsa_core::net::{AnnotatedNetwork, ModelBundle, Preset};
use vsa_core::snn::NetworkRun;

pub const SCHEMA: u32 = 1;

/// Reduction reported for the CIFAR-10 topology at eight time steps,
/// printed next to the simulated figure for comparison.
const CIFAR10_REFERENCE_REDUCTION: f64 = 35.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub fn unix_time() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn kb(bytes: u64) -> f64 {
    bytes as f64 / 1024.0
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| e.to_string())
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: String,
    pub kind: String,
    pub output: String,
    pub cycles: u64,
    pub warmup_cycles: u64,
    pub active_pe_cycles: u64,
    pub utilization: f64,
    pub steady_utilization: f64,
    pub spikes: usize,
    pub dram_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    pub network: String,
    pub input_shape: String,
    pub time_steps: usize,
    pub bundle_checksum: String,
    pub hardware: HardwareConfig,
    pub layers: Vec<LayerRow>,
    pub cycles: CycleReport,
    pub utilization: f64,
    pub steady_utilization: f64,
    pub peak_gops: f64,
    pub achieved_gops: f64,
    pub traffic: TrafficLedger,
    pub buffers: Vec<BufferModel>,
    pub class_counts: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_match: Option<bool>,
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        net: &AnnotatedNetwork,
        bundle: &ModelBundle,
        cfg: &HardwareConfig,
        time_steps: usize,
        engine: &EngineRun,
        traffic: TrafficLedger,
        trace: &PingpongTrace,
        oracle_match: Option<bool>,
        generated_at_unix: Option<u64>,
    ) -> Self {
        let mut layers = Vec::new();
        for (l, (c, train)) in net.layers.iter().zip(engine.cycles.iter().zip(&engine.layers)) {
            let dram = traffic.layers.iter().find(|t| t.index == l.index).map_or(0, |t| t.total());
            layers.push(LayerRow {
                layer: l.index.to_string(),
                kind: l.spec.kind.name().to_string(),
                output: l.output.to_string(),
                cycles: c.report.total_cycles,
                warmup_cycles: c.report.warmup_cycles,
                active_pe_cycles: c.report.active_pe_cycles,
                utilization: c.report.utilization(),
                steady_utilization: c.report.steady_utilization(),
                spikes: train.total_spikes(),
                dram_bytes: dram,
            });
        }
        let cycles = engine.total();
        layers.push(LayerRow {
            layer: "total".into(),
            kind: String::new(),
            output: net.output().to_string(),
            cycles: cycles.total_cycles,
            warmup_cycles: cycles.warmup_cycles,
            active_pe_cycles: cycles.active_pe_cycles,
            utilization: cycles.utilization(),
            steady_utilization: cycles.steady_utilization(),
            spikes: engine.layers.iter().map(|t| t.total_spikes()).sum(),
            dram_bytes: traffic.total_bytes,
        });
        RunReport {
            schema: SCHEMA,
            generated_at_unix,
            network: net.description().to_string(),
            input_shape: net.input.to_string(),
            time_steps,
            bundle_checksum: bundle.checksum_hex(),
            hardware: *cfg,
            layers,
            cycles,
            utilization: cycles.utilization(),
            steady_utilization: cycles.steady_utilization(),
            peak_gops: peak_gops(cfg),
            achieved_gops: cycles.achieved_gops(cfg.clock_hz),
            traffic,
            buffers: trace.buffers.clone(),
            class_counts: engine.class_counts.clone(),
            oracle_match,
        }
    }

    pub fn first_mismatch(&self, oracle: &NetworkRun, engine: &EngineRun) -> String {
        for (i, (a, b)) in oracle.layers.iter().zip(&engine.layers).enumerate() {
            for (t, (x, y)) in a.steps().iter().zip(b.steps()).enumerate() {
                if x != y {
                    return format!("layer {i} differs from the reference model at step {t}");
                }
            }
        }
        "spike trains differ".into()
    }

    pub fn render(&self, format: Format) -> Result<String, String> {
        match format {
            Format::Json => json(self),
            Format::Csv => csv_rows(&self.layers),
            Format::Text => Ok(self.text()),
        }
    }

    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "network      {} on {}", self.network, self.input_shape);
        let _ = writeln!(s, "time steps   {}", self.time_steps);
        let _ = writeln!(s, "bundle       {}", self.bundle_checksum);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>6} {:<13} {:>12} {:>12} {:>8} {:>8} {:>9} {:>12}",
            "layer", "kind", "output", "cycles", "util", "steady", "spikes", "dram bytes"
        );
        for r in &self.layers {
            let _ = writeln!(
                s,
                "{:>6} {:<13} {:>12} {:>12} {:>8.4} {:>8.4} {:>9} {:>12}",
                r.layer, r.kind, r.output, r.cycles, r.utilization, r.steady_utilization, r.spikes, r.dram_bytes
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "warmup cycles       {}", self.cycles.warmup_cycles);
        let _ = writeln!(s, "accumulator latency {} cycles", self.cycles.accumulator_latency_cycles);
        let _ = writeln!(s, "peak                {:.1} GOPS", self.peak_gops);
        let _ = writeln!(s, "achieved            {:.1} GOPS", self.achieved_gops);
        let _ = writeln!(
            s,
            "DRAM traffic        {:.3} KB ({})",
            kb(self.traffic.total_bytes),
            if self.traffic.layer_fusion { "fused" } else { "unfused" }
        );
        let _ = writeln!(s, "class counts        {:?}", self.class_counts);
        if let Some(m) = self.oracle_match {
            let _ = writeln!(s, "reference match     {m}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRow {
    pub layer: String,
    pub kind: String,
    pub weight_bytes: u64,
    pub unfused_input_bytes: u64,
    pub unfused_output_bytes: u64,
    pub fused_input_bytes: u64,
    pub fused_output_bytes: u64,
    pub fused_with_next: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub schema: u32,
    pub network: String,
    pub input_shape: String,
    pub time_steps: usize,
    pub plan: FusionPlan,
    pub unfused: TrafficLedger,
    pub fused: TrafficLedger,
    pub savings_bytes: u64,
    /// Twice the bytes of every fused intermediate map.
    pub expected_savings_bytes: u64,
    pub percent_reduction: f64,
    /// Image, hidden-layer spike and conv weight traffic only.
    pub conv_spike_subtotal_unfused_kb: f64,
    pub conv_spike_subtotal_fused_kb: f64,
    pub conv_spike_subtotal_percent_reduction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_percent_reduction: Option<f64>,
}

impl TrafficReport {
    pub fn new(net: &AnnotatedNetwork, layers: &[LayerFootprint], unfused: TrafficLedger, fused: TrafficLedger) -> Self {
        let t = fused.time_steps;
        let is_cifar = net.description().to_string() == Preset::Cifar10.network().to_string()
            && net.input == Preset::Cifar10.input_shape()
            && t == 8;
        let (ub, fb) = (unfused.breakdown, fused.breakdown);
        TrafficReport {
            schema: SCHEMA,
            network: net.description().to_string(),
            input_shape: net.input.to_string(),
            time_steps: t,
            plan: fused.plan.clone(),
            savings_bytes: unfused.total_bytes - fused.total_bytes,
            expected_savings_bytes: fusion_savings(layers, &fused.plan, t),
            percent_reduction: percent_reduction(unfused.total_bytes, fused.total_bytes),
            conv_spike_subtotal_unfused_kb: kb(ub.conv_spike_subtotal()),
            conv_spike_subtotal_fused_kb: kb(fb.conv_spike_subtotal()),
            conv_spike_subtotal_percent_reduction: percent_reduction(ub.conv_spike_subtotal(), fb.conv_spike_subtotal()),
            reference_percent_reduction: is_cifar.then_some(CIFAR10_REFERENCE_REDUCTION),
            unfused,
            fused,
        }
    }

    pub fn render(&self, format: Format) -> Result<String, String> {
        match format {
            Format::Json => json(self),
            Format::Csv => csv_rows(&self.rows()),
            Format::Text => Ok(self.text()),
        }
    }

    fn rows(&self) -> Vec<TrafficRow> {
        let mut rows: Vec<TrafficRow> = self
            .unfused
            .layers
            .iter()
            .zip(&self.fused.layers)
            .map(|(u, f)| TrafficRow {
                layer: u.index.to_string(),
                kind: u.kind.name().to_string(),
                weight_bytes: u.weight_bytes_read(),
                unfused_input_bytes: u.input_bytes_read,
                unfused_output_bytes: u.output_bytes_written,
                fused_input_bytes: f.input_bytes_read,
                fused_output_bytes: f.output_bytes_written,
                fused_with_next: f.fused_with_next,
            })
            .collect();
        let sum = |g: fn(&TrafficRow) -> u64, rows: &[TrafficRow]| rows.iter().map(g).sum::<u64>();
        rows.push(TrafficRow {
            layer: "total".into(),
            kind: String::new(),
            weight_bytes: sum(|r| r.weight_bytes, &rows),
            unfused_input_bytes: sum(|r| r.unfused_input_bytes, &rows),
            unfused_output_bytes: sum(|r| r.unfused_output_bytes, &rows),
            fused_input_bytes: sum(|r| r.fused_input_bytes, &rows),
            fused_output_bytes: sum(|r| r.fused_output_bytes, &rows),
            fused_with_next: false,
        });
        rows
    }

    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "network      {} on {}", self.network, self.input_shape);
        let _ = writeln!(s, "time steps   {}", self.time_steps);
        let plan: Vec<String> = self
            .plan
            .groups
            .iter()
            .map(|g| g.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("+"))
            .collect();
        let _ = writeln!(s, "fusion plan  {}", plan.join(" "));
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<24} {:>14} {:>14}", "item (KB)", "unfused", "fused");
        let lines: [(&str, fn(&TrafficBreakdown) -> u64); 7] = [
            ("image", |b| b.image_bytes),
            ("spike reads", |b| b.spike_read_bytes),
            ("spike writes", |b| b.spike_write_bytes),
            ("conv weights", |b| b.conv_weight_bytes),
            ("classifier spikes", |b| b.classifier_spike_bytes),
            ("fc weights", |b| b.fc_weight_bytes),
            ("bias/threshold params", |b| b.param_bytes),
        ];
        for (i, (name, get)) in lines.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:<24} {:>14.3} {:>14.3}",
                name,
                kb(get(&self.unfused.breakdown)),
                kb(get(&self.fused.breakdown))
            );
            if i == 3 {
                let _ = writeln!(
                    s,
                    "{:<24} {:>14.3} {:>14.3}   ({:.3}% less)",
                    "  conv/spike subtotal",
                    self.conv_spike_subtotal_unfused_kb,
                    self.conv_spike_subtotal_fused_kb,
                    self.conv_spike_subtotal_percent_reduction
                );
            }
        }
        let _ = writeln!(
            s,
            "{:<24} {:>14.3} {:>14.3}   ({:.3}% less)",
            "total",
            kb(self.unfused.total_bytes),
            kb(self.fused.total_bytes),
            self.percent_reduction
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "fusion savings {} B (twice the fused intermediates: {} B)",
            self.savings_bytes, self.expected_savings_bytes
        );
        if let Some(r) = self.reference_percent_reduction {
            let _ = writeln!(s, "reference reduction for this network: {r}%");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub network: String,
    pub cycles: u64,
    pub active_pe_cycles: u64,
    pub utilization: f64,
    pub steady_utilization: f64,
    pub achieved_gops: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub pe_count: usize,
    pub clock_hz: f64,
    pub peak_gops: f64,
    pub time_steps: usize,
    pub networks: Vec<BenchRow>,
}

impl BenchReport {
    pub fn new(cfg: &HardwareConfig, time_steps: usize) -> Self {
        BenchReport {
            schema: SCHEMA,
            pe_count: cfg.pe_count(),
            clock_hz: cfg.clock_hz,
            peak_gops: peak_gops(cfg),
            time_steps,
            networks: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, layers: &[(usize, CycleReport)], cfg: &HardwareConfig) {
        let mut total = CycleReport::default();
        for (_, r) in layers {
            total += *r;
        }
        self.networks.push(BenchRow {
            network: name.to_string(),
            cycles: total.total_cycles,
            active_pe_cycles: total.active_pe_cycles,
            utilization: total.utilization(),
            steady_utilization: total.steady_utilization(),
            achieved_gops: total.achieved_gops(cfg.clock_hz),
            latency_ms: total.total_cycles as f64 / cfg.clock_hz * 1e3,
        });
    }

    pub fn render(&self, format: Format) -> Result<String, String> {
        match format {
            Format::Json => json(self),
            Format::Csv => csv_rows(&self.networks),
            Format::Text => {
                let mut s = String::new();
                let _ = writeln!(s, "PEs {} at {:.0} MHz: peak {:.1} GOPS", self.pe_count, self.clock_hz / 1e6, self.peak_gops);
                let _ = writeln!(s, "{} time steps", self.time_steps);
                for r in &self.networks {
                    let _ = writeln!(
                        s,
                        "{:<8} {:>12} cycles  {:>8.3} ms  utilization {:.4} (steady {:.4})  {:.1} GOPS",
                        r.network, r.cycles, r.latency_ms, r.utilization, r.steady_utilization, r.achieved_gops
                    );
                }
                Ok(s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_fixed_header() {
        let row = LayerRow {
            layer: "0".into(),
            kind: "conv".into(),
            output: "1x2x2".into(),
            cycles: 1,
            warmup_cycles: 0,
            active_pe_cycles: 1,
            utilization: 0.5,
            steady_utilization: 0.5,
            spikes: 2,
            dram_bytes: 3,
        };
        let text = csv_rows(&[row]).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "layer,kind,output,cycles,warmup_cycles,active_pe_cycles,utilization,steady_utilization,spikes,dram_bytes"
        );
    }

    #[test]
    fn bench_peak() {
        let cfg = HardwareConfig::default();
        assert_eq!(BenchReport::new(&cfg, 8).peak_gops, 2304.0);
        let half = HardwareConfig { clock_hz: 250e6, ..cfg };
        assert_eq!(BenchReport::new(&half, 8).peak_gops, 1152.0);
    }
}
