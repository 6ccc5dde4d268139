//! Buffer-level schedule of a whole inference with tick batching and fusion.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arch::HardwareConfig;
use crate::net::LayerKind;
use crate::snn::{SpikeMap, SpikeTrain};

use super::{spike_map_bytes, strip_bytes, BufferModel, BufferRole, FusionPlan, LayerFootprint, MemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Location {
    Dram,
    Buffer(BufferRole),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Access {
    Read,
    Write,
}

/// What a block of data is. Spike maps are named by the network layer whose
/// output they are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataTag {
    Image,
    Weights { layer: usize },
    Spikes { layer: usize, step: usize },
    ConvResult { layer: usize },
    Potentials { layer: usize },
    Boundary { layer: usize },
}

impl fmt::Display for DataTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataTag::Image => write!(f, "image"),
            DataTag::Weights { layer } => write!(f, "weights of layer {layer}"),
            DataTag::Spikes { layer, step } => write!(f, "spikes of layer {layer} step {step}"),
            DataTag::ConvResult { layer } => write!(f, "conv result of layer {layer}"),
            DataTag::Potentials { layer } => write!(f, "potentials of layer {layer}"),
            DataTag::Boundary { layer } => write!(f, "boundary rows of layer {layer}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub layer: usize,
    pub step: Option<usize>,
    pub access: Access,
    pub location: Location,
    pub tag: DataTag,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PingpongTrace {
    pub events: Vec<TraceEvent>,
    pub buffers: Vec<BufferModel>,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    /// Spike maps whose buffered contents were compared against the expected trains.
    pub verified_maps: usize,
}

impl PingpongTrace {
    pub fn buffer(&self, role: BufferRole) -> &BufferModel {
        self.buffers.iter().find(|b| b.role == role).expect("every role is modeled")
    }
}

struct DramEntry {
    reads: usize,
    payload: Option<SpikeMap>,
}

struct Sim<'a> {
    cfg: &'a HardwareConfig,
    trains: Option<&'a [SpikeTrain]>,
    buffers: BTreeMap<BufferRole, BufferModel>,
    contents: HashMap<BufferRole, (DataTag, Option<SpikeMap>)>,
    dram: HashMap<DataTag, DramEntry>,
    events: Vec<TraceEvent>,
    dram_read_bytes: u64,
    dram_write_bytes: u64,
    verified: usize,
    layer: usize,
    step: Option<usize>,
}

impl Sim<'_> {
    fn event(&mut self, access: Access, location: Location, tag: DataTag, bytes: u64) {
        self.events.push(TraceEvent { layer: self.layer, step: self.step, access, location, tag, bytes });
    }

    fn expected(&self, tag: DataTag) -> Option<SpikeMap> {
        match (tag, self.trains) {
            (DataTag::Spikes { layer, step }, Some(trains)) => Some(trains[layer].step(step).clone()),
            _ => None,
        }
    }

    fn write(&mut self, role: BufferRole, tag: DataTag, bytes: u64, payload: Option<SpikeMap>) -> Result<(), MemError> {
        self.buffers.get_mut(&role).expect("every role is modeled").write(bytes)?;
        self.contents.insert(role, (tag, payload));
        self.event(Access::Write, Location::Buffer(role), tag, bytes);
        Ok(())
    }

    /// Reads `tag` from `role`, failing if the buffer holds anything else, and
    /// checks spike payloads against the expected trains.
    fn read(&mut self, role: BufferRole, tag: DataTag) -> Result<Option<SpikeMap>, MemError> {
        let payload = match self.contents.get(&role) {
            Some((held, payload)) if *held == tag => payload.clone(),
            Some((held, _)) => return Err(MemError::ReadBeforeWrite(format!("{role} holds {held}, wanted {tag}"))),
            None => return Err(MemError::ReadBeforeWrite(format!("{role} is empty, wanted {tag}"))),
        };
        let bytes = self.buffers[&role].occupancy;
        self.buffers.get_mut(&role).expect("every role is modeled").read(bytes);
        self.event(Access::Read, Location::Buffer(role), tag, bytes);
        self.verify(tag, payload.as_ref())?;
        Ok(payload)
    }

    fn verify(&mut self, tag: DataTag, payload: Option<&SpikeMap>) -> Result<(), MemError> {
        if let (Some(got), Some(want)) = (payload, self.expected(tag)) {
            if got.bits() != want.bits() {
                return Err(MemError::Mismatch(format!("{tag} differs from the reference output")));
            }
            self.verified += 1;
        }
        Ok(())
    }

    fn dram_write(&mut self, tag: DataTag, bytes: u64, payload: Option<SpikeMap>) {
        self.dram.insert(tag, DramEntry { reads: 0, payload });
        self.dram_write_bytes += bytes;
        self.event(Access::Write, Location::Dram, tag, bytes);
    }

    fn dram_read(&mut self, tag: DataTag, bytes: u64) -> Result<Option<SpikeMap>, MemError> {
        let entry = self
            .dram
            .get_mut(&tag)
            .ok_or_else(|| MemError::ReadBeforeWrite(format!("{tag} is not in DRAM")))?;
        entry.reads += 1;
        if matches!(tag, DataTag::Spikes { .. }) && entry.reads > 1 {
            return Err(MemError::RepeatedRead(tag.to_string()));
        }
        let payload = entry.payload.clone();
        self.dram_read_bytes += bytes;
        self.event(Access::Read, Location::Dram, tag, bytes);
        Ok(payload)
    }

    fn load_weights(&mut self, l: &LayerFootprint, role: BufferRole) -> Result<(), MemError> {
        let tag = DataTag::Weights { layer: l.index };
        let bytes = l.weight_bytes();
        self.dram_read(tag, bytes)?;
        let half = self.cfg.sram.weight_bytes;
        if bytes <= half {
            self.write(role, tag, bytes, None)
        } else {
            // A standalone layer too large for one half spans both.
            self.write(BufferRole::WeightA, tag, half, None)?;
            self.write(BufferRole::WeightB, tag, bytes - half, None)
        }
    }

    fn weight_role(&self, l: &LayerFootprint, preferred: BufferRole) -> BufferRole {
        if l.weight_bytes() <= self.cfg.sram.weight_bytes {
            preferred
        } else {
            BufferRole::WeightA
        }
    }

    /// Per-output-channel membrane working set and boundary rows of one step of `l`.
    fn compute(&mut self, l: &LayerFootprint, membrane: BufferRole, weights: BufferRole) -> Result<(), MemError> {
        let conv = l.conv_output();
        let width = self.cfg.format().byte_width() as u64;
        self.read(weights, DataTag::Weights { layer: l.index })?;
        self.write(membrane, DataTag::Potentials { layer: l.index }, (conv.height * conv.width) as u64 * width, None)?;
        let (kh, kw) = l.kernel;
        if conv.height + kh - 1 > self.cfg.array_rows && kh > 1 {
            let bytes = ((kh - 1) * (conv.width + kw - 1)) as u64 * width;
            self.write(BufferRole::Boundary, DataTag::Boundary { layer: l.index }, bytes, None)?;
            self.read(BufferRole::Boundary, DataTag::Boundary { layer: l.index })?;
        }
        Ok(())
    }

    fn produce(&mut self, l: &LayerFootprint, t: usize) -> (DataTag, Option<SpikeMap>) {
        let tag = DataTag::Spikes { layer: l.stored_index, step: t };
        (tag, self.expected(tag))
    }
}

/// Walks every buffer access of an inference: weights alternate between the
/// two weight buffers from group to group, input spike maps between the two
/// spike buffers from step to step, and in a fused pair the second layer's
/// output overwrites the spike buffer its first layer just consumed.
///
/// With `trains` (indexed by network layer) every spike map moved through a
/// buffer is compared with the expected layer output.
pub fn pingpong_schedule(
    layers: &[LayerFootprint],
    plan: &FusionPlan,
    time_steps: usize,
    cfg: &HardwareConfig,
    trains: Option<&[SpikeTrain]>,
) -> Result<PingpongTrace, MemError> {
    plan.check(layers, cfg)?;
    let mut sim = Sim {
        cfg,
        trains,
        buffers: BufferRole::ALL.iter().map(|&r| (r, BufferModel::new(r, r.capacity(&cfg.sram)))).collect(),
        contents: HashMap::new(),
        dram: HashMap::new(),
        events: Vec::new(),
        dram_read_bytes: 0,
        dram_write_bytes: 0,
        verified: 0,
        layer: 0,
        step: None,
    };
    sim.dram.insert(DataTag::Image, DramEntry { reads: 0, payload: None });
    for l in layers {
        sim.dram.insert(DataTag::Weights { layer: l.index }, DramEntry { reads: 0, payload: None });
    }
    let width = cfg.format().byte_width() as u64;
    let mut pos = 0;
    for (gi, group) in plan.groups.iter().enumerate() {
        let ls = &layers[pos..pos + group.len()];
        let prev = pos.checked_sub(1).map(|p| &layers[p]);
        pos += group.len();
        let a = &ls[0];
        sim.layer = a.index;
        sim.step = None;
        let wa = if gi % 2 == 0 { BufferRole::WeightA } else { BufferRole::WeightB };
        let wa = sim.weight_role(a, wa);
        sim.load_weights(a, wa)?;
        if let [_, b] = ls {
            sim.layer = b.index;
            let wb = if wa == BufferRole::WeightA { BufferRole::WeightB } else { BufferRole::WeightA };
            sim.load_weights(b, wb)?;
        }
        sim.layer = a.index;

        if a.kind == LayerKind::EncodingConv {
            let bytes = a.input.len() as u64;
            sim.dram_read(DataTag::Image, bytes)?;
            sim.write(BufferRole::SpikeA, DataTag::Image, bytes, None)?;
            sim.read(BufferRole::SpikeA, DataTag::Image)?;
            // The convolution runs once; its per-channel result sits in the second membrane buffer.
            let conv = a.conv_output();
            sim.write(BufferRole::Membrane2, DataTag::ConvResult { layer: a.index }, (conv.height * conv.width) as u64 * width, None)?;
            for t in 0..time_steps {
                sim.step = Some(t);
                sim.read(BufferRole::Membrane2, DataTag::ConvResult { layer: a.index })?;
                sim.write(BufferRole::Membrane1, DataTag::Potentials { layer: a.index }, (conv.height * conv.width) as u64 * width, None)?;
                let (tag, payload) = sim.produce(a, t);
                sim.write(BufferRole::Temp, tag, strip_bytes(a.output, cfg.array_rows), payload.clone())?;
                sim.read(BufferRole::Temp, tag)?;
                sim.dram_write(tag, spike_map_bytes(a.output, 1), payload);
            }
            continue;
        }

        let prev = prev.expect("a spiking layer has a producer");
        for t in 0..time_steps {
            sim.step = Some(t);
            sim.layer = a.index;
            let spike = BufferRole::spike(t);
            let in_tag = DataTag::Spikes { layer: prev.stored_index, step: t };
            let in_bytes = spike_map_bytes(a.input, 1);
            let payload = sim.dram_read(in_tag, in_bytes)?;
            sim.write(spike, in_tag, in_bytes, payload)?;
            sim.read(spike, in_tag)?;
            sim.compute(a, BufferRole::Membrane1, wa)?;
            let (mid_tag, mid) = sim.produce(a, t);
            sim.write(BufferRole::Temp, mid_tag, strip_bytes(a.output, cfg.array_rows), mid.clone())?;
            match ls {
                [_, b] => {
                    sim.layer = b.index;
                    sim.read(BufferRole::Temp, mid_tag)?;
                    let wb = if wa == BufferRole::WeightA { BufferRole::WeightB } else { BufferRole::WeightA };
                    sim.compute(b, BufferRole::Membrane2, wb)?;
                    let (out_tag, out) = sim.produce(b, t);
                    sim.write(spike, out_tag, spike_map_bytes(b.output, 1), out.clone())?;
                    sim.read(spike, out_tag)?;
                    sim.dram_write(out_tag, spike_map_bytes(b.output, 1), out);
                }
                _ => {
                    sim.read(BufferRole::Temp, mid_tag)?;
                    sim.dram_write(mid_tag, spike_map_bytes(a.output, 1), mid);
                }
            }
        }
    }
    Ok(PingpongTrace {
        events: sim.events,
        buffers: sim.buffers.into_values().collect(),
        dram_read_bytes: sim.dram_read_bytes,
        dram_write_bytes: sim.dram_write_bytes,
        verified_maps: sim.verified,
    })
}
