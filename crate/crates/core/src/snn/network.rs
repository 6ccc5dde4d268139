use crate::net::{LayerKind, ModelBundle};

use super::{
    conv2d_oracle, maxpool2_oracle, FoldedNeuronParams, ImageTensor, IntMap, MembraneState, Padding, SnnError,
    SpikeMap, SpikeTrain,
};

/// Spike trains of every layer plus per-class spike counts of the last layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkRun {
    pub layers: Vec<SpikeTrain>,
    pub class_counts: Vec<u32>,
}

fn integrate(membrane: &mut MembraneState, conv: &IntMap, params: &FoldedNeuronParams) -> Result<SpikeMap, SnnError> {
    let shape = conv.shape();
    let fmt = params.format;
    let plane = shape.height * shape.width;
    let mut bits = Vec::with_capacity(shape.len());
    for (i, &x) in conv.data().iter().enumerate() {
        let ch = params.channels[i / plane];
        let input = fmt.sub(fmt.from_int(x as i64)?, ch.bias)?;
        bits.push(membrane.integrate(i, input, ch.fire_rule())?);
    }
    SpikeMap::from_bits(shape, bits)
}

/// Layer-by-layer reference inference over `time_steps` steps.
///
/// The encoding layer convolves the static 8-bit image once and integrates
/// that constant result on every step. Spiking layers convolve each step's
/// input spikes, fc layers are 1x1 convolutions over the flattened input,
/// and pooling ORs 2x2 windows.
pub fn run_network_oracle(
    bundle: &ModelBundle,
    input: &ImageTensor,
    time_steps: usize,
) -> Result<NetworkRun, SnnError> {
    if time_steps == 0 {
        return Err(SnnError::InvalidParameter("time steps must be positive".into()));
    }
    let net = bundle.annotated().map_err(|e| SnnError::DimensionMismatch(e.to_string()))?;
    if input.shape() != net.input {
        return Err(SnnError::DimensionMismatch(format!(
            "input {} does not match network input {}",
            input.shape(),
            net.input
        )));
    }
    let mut trains: Vec<SpikeTrain> = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let mut train = SpikeTrain::new(layer.output);
        let params = bundle.params(layer.index);
        match (layer.spec.kind, params) {
            (LayerKind::EncodingConv, Some(p)) => {
                let conv = conv2d_oracle(&input.to_int_map(), &p.weights, Padding::Zero(layer.spec.padding))?;
                let mut membrane = MembraneState::new(p.folded.format, layer.output);
                for _ in 0..time_steps {
                    train.push(integrate(&mut membrane, &conv, &p.folded)?)?;
                }
            }
            (LayerKind::Conv | LayerKind::Fc, Some(p)) => {
                let prev = trains.last().expect("validated: encoding layer comes first");
                let mut membrane = MembraneState::new(p.folded.format, layer.output);
                for step in prev.steps() {
                    let src = if layer.spec.kind == LayerKind::Fc { step.flattened() } else { step.clone() };
                    let conv = conv2d_oracle(&src.to_int_map(), &p.weights, Padding::Zero(layer.spec.padding))?;
                    train.push(integrate(&mut membrane, &conv, &p.folded)?)?;
                }
            }
            (LayerKind::MaxPool2, None) => {
                let prev = trains.last().expect("validated: encoding layer comes first");
                for step in prev.steps() {
                    train.push(maxpool2_oracle(step)?)?;
                }
            }
            _ => unreachable!("bundle annotation checks parameter presence"),
        }
        trains.push(train);
    }
    let class_counts = trains.last().map(SpikeTrain::channel_counts).unwrap_or_default();
    Ok(NetworkRun { layers: trains, class_counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::QFormat;
    use crate::net::{generate_random_bundle, parse_network, random_image, validate, LayerParams};
    use crate::snn::{fold_bn_scaled, BinaryWeightTensor, BnParams, FoldedNeuronParams, Shape3};

    #[test]
    fn zero_image_gives_no_spikes() {
        let net = validate(&parse_network("8Conv(encoding)-MP2-8Conv-4fc").unwrap(), Shape3::new(2, 6, 6)).unwrap();
        let mut bundle = generate_random_bundle(&net, 5, QFormat::Q24_8, 1e-5).unwrap();
        // Non-negative folded biases make an all-zero input sub-threshold everywhere.
        for p in bundle.layers.iter_mut().flatten() {
            for c in &mut p.folded.channels {
                c.bias = c.bias.abs();
            }
        }
        let run = run_network_oracle(&bundle, &ImageTensor::zeros(net.input), 4).unwrap();
        assert_eq!(run.layers.len(), 4);
        assert!(run.layers.iter().all(|t| t.total_spikes() == 0 && t.time_steps() == 4));
        assert_eq!(run.class_counts, vec![0; 4]);
    }

    #[test]
    fn constant_encoding_input_fires_every_step() {
        // One pixel of 255 through a +1 unit kernel: x = 255 against a threshold
        // of 0.5 scaled by 256 = 128, so the neuron fires on every step.
        let net = validate(&parse_network("1Conv(encoding){k=1,pad=0,vth=0.5}").unwrap(), Shape3::new(1, 1, 1)).unwrap();
        let fmt = QFormat::Q24_8;
        let folded = fold_bn_scaled(&BnParams::identity(), 0.5, fmt, 256.0).unwrap();
        assert_eq!(fmt.to_real(folded.threshold), 128.0);
        let bundle = ModelBundle {
            net: net.description(),
            input_shape: net.input,
            format: fmt,
            layers: vec![Some(LayerParams {
                weights: BinaryWeightTensor::from_weights(1, 1, 1, 1, &[1]).unwrap(),
                folded: FoldedNeuronParams { format: fmt, channels: vec![folded] },
            })],
        };
        let image = ImageTensor::from_vec(net.input, vec![255]).unwrap();
        let run = run_network_oracle(&bundle, &image, 6).unwrap();
        assert_eq!(run.class_counts, vec![6]);
    }

    #[test]
    fn mnist_topology_is_deterministic() {
        let net = validate(&crate::net::Preset::Mnist.network(), Shape3::new(1, 8, 8)).unwrap();
        let bundle = generate_random_bundle(&net, 11, QFormat::Q24_8, 1e-5).unwrap();
        let image = random_image(net.input, 12);
        let a = run_network_oracle(&bundle, &image, 8).unwrap();
        let b = run_network_oracle(&bundle, &image, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers.last().unwrap().shape(), Shape3::new(10, 1, 1));
        assert!(a.layers[0].total_spikes() > 0);
    }

    #[test]
    fn rejects_bad_input() {
        let net = validate(&parse_network("2Conv(encoding)").unwrap(), Shape3::new(1, 4, 4)).unwrap();
        let bundle = generate_random_bundle(&net, 0, QFormat::Q24_8, 1e-5).unwrap();
        assert!(run_network_oracle(&bundle, &ImageTensor::zeros(Shape3::new(1, 4, 5)), 2).is_err());
        assert!(run_network_oracle(&bundle, &ImageTensor::zeros(net.input), 0).is_err());
    }
}
