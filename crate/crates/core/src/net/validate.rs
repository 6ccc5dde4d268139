use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snn::Shape3;

use super::desc::{LayerKind, LayerSpec, NetworkDescription};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("layer {layer}: {reason}")]
pub struct ValidationError {
    pub layer: usize,
    pub reason: String,
}

/// A layer with its propagated input and output dimensions. For fc layers
/// `input` is the already-flattened `(C*H*W)x1x1` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedLayer {
    pub index: usize,
    pub spec: LayerSpec,
    pub input: Shape3,
    pub output: Shape3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedNetwork {
    pub input: Shape3,
    pub layers: Vec<AnnotatedLayer>,
}

impl AnnotatedNetwork {
    pub fn output(&self) -> Shape3 {
        self.layers.last().map(|l| l.output).unwrap_or(self.input)
    }

    pub fn description(&self) -> NetworkDescription {
        NetworkDescription::new(self.layers.iter().map(|l| l.spec.clone()).collect())
    }
}

/// Propagates shapes through the network, failing at the first layer whose
/// input does not fit.
pub fn validate(net: &NetworkDescription, input: Shape3) -> Result<AnnotatedNetwork, ValidationError> {
    if net.is_empty() {
        return Err(ValidationError { layer: 0, reason: "empty network".into() });
    }
    if input.is_empty() {
        return Err(ValidationError { layer: 0, reason: format!("empty input {input}") });
    }
    let mut shape = input;
    let mut layers = Vec::with_capacity(net.len());
    for (index, spec) in net.layers.iter().enumerate() {
        let err = |reason: String| ValidationError { layer: index, reason };
        match (index, spec.kind) {
            (0, LayerKind::EncodingConv) => {}
            (0, _) => return Err(err("first layer must be the encoding layer".into())),
            (_, LayerKind::EncodingConv) => return Err(err("only the first layer may be an encoding layer".into())),
            _ => {}
        }
        if spec.kind.is_compute() && spec.out_channels == 0 {
            return Err(err("zero output channels".into()));
        }
        let (layer_in, out) = match spec.kind {
            LayerKind::EncodingConv | LayerKind::Conv => {
                let (kh, kw) = spec.kernel;
                let (hp, wp) = (shape.height + 2 * spec.padding, shape.width + 2 * spec.padding);
                if kh == 0 || kw == 0 || kh > hp || kw > wp {
                    return Err(err(format!(
                        "{kh}x{kw} kernel does not fit {shape} input with padding {}",
                        spec.padding
                    )));
                }
                (shape, Shape3::new(spec.out_channels, hp - kh + 1, wp - kw + 1))
            }
            LayerKind::MaxPool2 => {
                if !shape.height.is_multiple_of(2) || !shape.width.is_multiple_of(2) {
                    return Err(err(format!("2x2 pooling needs even dimensions, got {shape}")));
                }
                (shape, Shape3::new(shape.channels, shape.height / 2, shape.width / 2))
            }
            LayerKind::Fc => (shape.flattened(), Shape3::new(spec.out_channels, 1, 1)),
        };
        layers.push(AnnotatedLayer { index, spec: spec.clone(), input: layer_in, output: out });
        shape = out;
    }
    Ok(AnnotatedNetwork { input, layers })
}
