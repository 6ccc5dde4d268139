//! IF unit: bias subtraction, membrane update and threshold compare.

use crate::fixed::QFormat;
use crate::snn::{FoldedNeuronParams, IntMap, MembraneState, Shape3, SpikeMap};

use super::ArchError;

/// IF unit of one layer. The first membrane buffer holds the potentials; the
/// second holds the encoding layer's convolution result so it can be
/// re-integrated on every time step without recomputing it.
#[derive(Debug, Clone)]
pub struct IfUnit {
    membrane: MembraneState,
    held: Option<IntMap>,
}

impl IfUnit {
    pub fn new(format: QFormat, shape: Shape3) -> Self {
        Self { membrane: MembraneState::new(format, shape), held: None }
    }

    pub fn membrane(&self) -> &MembraneState {
        &self.membrane
    }

    /// Integrates one step of convolution results and fires.
    pub fn process(&mut self, conv_out: &IntMap, params: &FoldedNeuronParams) -> Result<SpikeMap, ArchError> {
        let shape = self.membrane.shape();
        if conv_out.shape() != shape || params.channels.len() != shape.channels {
            return Err(ArchError::Shape(format!(
                "IF unit for {shape} got conv output {} and {} channel parameters",
                conv_out.shape(),
                params.channels.len()
            )));
        }
        let fmt = self.membrane.format;
        let plane = shape.height * shape.width;
        let mut spikes = SpikeMap::zeros(shape);
        for (c, ch) in params.channels.iter().enumerate() {
            let rule = ch.fire_rule();
            for p in 0..plane {
                let i = c * plane + p;
                let weighted = fmt.sub(fmt.from_int(conv_out.data()[i] as i64)?, ch.bias)?;
                if self.membrane.integrate(i, weighted, rule)? {
                    spikes.set(c, p / shape.width, p % shape.width, true);
                }
            }
        }
        Ok(spikes)
    }

    /// Stores the encoding layer's convolution result in the second membrane buffer.
    pub fn hold(&mut self, conv_out: IntMap) {
        self.held = Some(conv_out);
    }

    /// Re-integrates the held encoding result for one more time step.
    pub fn process_held(&mut self, params: &FoldedNeuronParams) -> Result<SpikeMap, ArchError> {
        let held = self.held.take().ok_or_else(|| ArchError::Shape("no encoding result held".into()))?;
        let out = self.process(&held, params);
        self.held = Some(held);
        out
    }
}
