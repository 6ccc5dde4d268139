use serde::{Deserialize, Serialize};

use crate::net::{LayerKind, ModelBundle};
use crate::snn::{ImageTensor, SpikeTrain};

use super::{
    or_pool2, schedule_conv_layer, schedule_encoding_layer, ArchError, BoundaryStats, CycleReport, HardwareConfig,
    IfUnit,
};

/// Datapath statistics of one layer over all time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerCycles {
    pub index: usize,
    pub kind: LayerKind,
    pub report: CycleReport,
    pub boundary: BoundaryStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineRun {
    pub layers: Vec<SpikeTrain>,
    pub class_counts: Vec<u32>,
    pub cycles: Vec<LayerCycles>,
}

impl EngineRun {
    pub fn total(&self) -> CycleReport {
        let mut total = CycleReport::default();
        for l in &self.cycles {
            total += l.report;
        }
        total
    }
}

/// Runs a whole network through the datapath model with tick batching: each
/// layer processes all time steps before the next layer starts.
pub fn run_network_engine(
    bundle: &ModelBundle,
    input: &ImageTensor,
    time_steps: usize,
    cfg: &HardwareConfig,
) -> Result<EngineRun, ArchError> {
    cfg.validate()?;
    if time_steps == 0 {
        return Err(ArchError::Config("time steps must be positive".into()));
    }
    if bundle.format != cfg.format() {
        return Err(ArchError::Config(format!(
            "bundle uses {}-bit/{} fractional fixed point, hardware {}/{}",
            bundle.format.total_bits, bundle.format.frac_bits, cfg.total_bits, cfg.frac_bits
        )));
    }
    let net = bundle.annotated().map_err(|e| ArchError::Shape(e.to_string()))?;
    if input.shape() != net.input {
        return Err(ArchError::Shape(format!("input {} does not match network input {}", input.shape(), net.input)));
    }
    let mut trains: Vec<SpikeTrain> = Vec::with_capacity(net.layers.len());
    let mut cycles = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let mut train = SpikeTrain::new(layer.output);
        let mut report = CycleReport::default();
        let mut boundary = BoundaryStats::default();
        let pad = layer.spec.padding;
        match layer.spec.kind {
            LayerKind::EncodingConv => {
                let p = bundle.params(layer.index).expect("annotated bundle has encoding parameters");
                // The static image is convolved once and re-integrated every step.
                let pass = schedule_encoding_layer(&p.weights, input, pad, cfg)?;
                report = pass.report;
                boundary = pass.boundary;
                let mut unit = IfUnit::new(bundle.format, layer.output);
                unit.hold(pass.output);
                for _ in 0..time_steps {
                    train.push(unit.process_held(&p.folded)?)?;
                }
            }
            LayerKind::Conv | LayerKind::Fc => {
                let p = bundle.params(layer.index).expect("annotated bundle has layer parameters");
                let prev = trains.last().expect("encoding layer comes first");
                let mut unit = IfUnit::new(bundle.format, layer.output);
                for step in prev.steps() {
                    let pass = if layer.spec.kind == LayerKind::Fc {
                        schedule_conv_layer(&p.weights, &step.flattened(), 0, cfg)?
                    } else {
                        schedule_conv_layer(&p.weights, step, pad, cfg)?
                    };
                    report += pass.report;
                    boundary.deposits += pass.boundary.deposits;
                    boundary.peak_entries = boundary.peak_entries.max(pass.boundary.peak_entries);
                    boundary.peak_bytes = boundary.peak_bytes.max(pass.boundary.peak_bytes);
                    train.push(unit.process(&pass.output, &p.folded)?)?;
                }
            }
            LayerKind::MaxPool2 => {
                let prev = trains.last().expect("encoding layer comes first");
                for step in prev.steps() {
                    train.push(or_pool2(step)?)?;
                }
            }
        }
        cycles.push(LayerCycles { index: layer.index, kind: layer.spec.kind, report, boundary });
        trains.push(train);
    }
    let class_counts = trains.last().map(SpikeTrain::channel_counts).unwrap_or_default();
    Ok(EngineRun { layers: trains, class_counts, cycles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::QFormat;
    use crate::net::{generate_random_bundle, parse_network, random_image, validate};
    use crate::snn::{run_network_oracle, Shape3};

    #[test]
    fn small_net_matches_oracle() {
        let net = validate(&parse_network("8Conv(encoding)-MP2-40Conv-MP2-6fc").unwrap(), Shape3::new(3, 12, 12)).unwrap();
        let bundle = generate_random_bundle(&net, 3, QFormat::Q24_8, 1e-5).unwrap();
        let image = random_image(net.input, 4);
        let cfg = HardwareConfig::default();
        let engine = run_network_engine(&bundle, &image, 4, &cfg).unwrap();
        let oracle = run_network_oracle(&bundle, &image, 4).unwrap();
        assert_eq!(engine.layers, oracle.layers);
        assert_eq!(engine.class_counts, oracle.class_counts);
        assert_eq!(engine.cycles.len(), 5);
        assert_eq!(engine.cycles[1].report, CycleReport::default());
        assert!(engine.total().utilization() <= 1.0);
    }

    #[test]
    fn format_mismatch_rejected() {
        let net = validate(&parse_network("2Conv(encoding)").unwrap(), Shape3::new(1, 4, 4)).unwrap();
        let bundle = generate_random_bundle(&net, 0, QFormat::new(16, 4), 1e-5).unwrap();
        let err = run_network_engine(&bundle, &ImageTensor::zeros(net.input), 1, &HardwareConfig::default());
        assert!(matches!(err, Err(ArchError::Config(_))));
    }
}
