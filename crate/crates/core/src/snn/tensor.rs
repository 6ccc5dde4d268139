use serde::{Deserialize, Serialize};

use super::SnnError;

/// Channel-major feature-map dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape3 {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        (c * self.height + y) * self.width + x
    }

    /// Same channel count with `pad` rows/columns added on every side.
    pub fn padded(&self, pad: usize) -> Shape3 {
        Shape3::new(self.channels, self.height + 2 * pad, self.width + 2 * pad)
    }

    /// All features as channels of a 1x1 map.
    pub fn flattened(&self) -> Shape3 {
        Shape3::new(self.len(), 1, 1)
    }
}

impl std::fmt::Display for Shape3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// One time step of binary activations, `[C][H][W]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeMap {
    shape: Shape3,
    bits: Vec<bool>,
}

impl SpikeMap {
    pub fn zeros(shape: Shape3) -> Self {
        Self { shape, bits: vec![false; shape.len()] }
    }

    pub fn from_bits(shape: Shape3, bits: Vec<bool>) -> Result<Self, SnnError> {
        if bits.len() != shape.len() {
            return Err(SnnError::DimensionMismatch(format!(
                "spike map {shape} needs {} bits, got {}",
                shape.len(),
                bits.len()
            )));
        }
        Ok(Self { shape, bits })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> bool {
        self.bits[self.shape.index(c, y, x)]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: bool) {
        let i = self.shape.index(c, y, x);
        self.bits[i] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn channel_count(&self, c: usize) -> usize {
        let plane = self.shape.height * self.shape.width;
        self.bits[c * plane..(c + 1) * plane].iter().filter(|&&b| b).count()
    }

    /// Reinterprets the map as `C*H*W` channels of a 1x1 map (channel-major order).
    pub fn flattened(&self) -> SpikeMap {
        SpikeMap { shape: self.shape.flattened(), bits: self.bits.clone() }
    }

    /// Materializes `pad` rows/columns of zeros around every channel.
    pub fn zero_padded(&self, pad: usize) -> SpikeMap {
        if pad == 0 {
            return self.clone();
        }
        let mut out = SpikeMap::zeros(self.shape.padded(pad));
        for c in 0..self.shape.channels {
            for y in 0..self.shape.height {
                for x in 0..self.shape.width {
                    out.set(c, y + pad, x + pad, self.get(c, y, x));
                }
            }
        }
        out
    }

    pub fn to_int_map(&self) -> IntMap {
        IntMap { shape: self.shape, data: self.bits.iter().map(|&b| b as i32).collect() }
    }

    /// Bit-packed storage, LSB first, `ceil(C*H*W / 8)` bytes.
    pub fn pack(&self) -> Vec<u8> {
        crate::bits::pack(&self.bits)
    }

    pub fn unpack(shape: Shape3, bytes: &[u8]) -> Result<Self, SnnError> {
        if bytes.len() != shape.len().div_ceil(8) {
            return Err(SnnError::DimensionMismatch(format!(
                "packed spike map {shape} needs {} bytes, got {}",
                shape.len().div_ceil(8),
                bytes.len()
            )));
        }
        Ok(Self { shape, bits: crate::bits::unpack(bytes, shape.len()) })
    }
}

/// Binary activations over time, indexed `[t][C][H][W]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeTrain {
    shape: Shape3,
    steps: Vec<SpikeMap>,
}

impl SpikeTrain {
    pub fn new(shape: Shape3) -> Self {
        Self { shape, steps: Vec::new() }
    }

    pub fn from_steps(shape: Shape3, steps: Vec<SpikeMap>) -> Result<Self, SnnError> {
        if let Some(bad) = steps.iter().find(|m| m.shape() != shape) {
            return Err(SnnError::DimensionMismatch(format!(
                "spike train of {shape} cannot hold a {} map",
                bad.shape()
            )));
        }
        Ok(Self { shape, steps })
    }

    pub fn push(&mut self, map: SpikeMap) -> Result<(), SnnError> {
        if map.shape() != self.shape {
            return Err(SnnError::DimensionMismatch(format!(
                "spike train of {} cannot hold a {} map",
                self.shape,
                map.shape()
            )));
        }
        self.steps.push(map);
        Ok(())
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn time_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, t: usize) -> &SpikeMap {
        &self.steps[t]
    }

    pub fn steps(&self) -> &[SpikeMap] {
        &self.steps
    }

    pub fn total_spikes(&self) -> usize {
        self.steps.iter().map(SpikeMap::count_ones).sum()
    }

    /// Spikes per channel summed over all time steps.
    pub fn channel_counts(&self) -> Vec<u32> {
        (0..self.shape.channels)
            .map(|c| self.steps.iter().map(|m| m.channel_count(c) as u32).sum())
            .collect()
    }
}

/// Dense signed integer map, used for convolution results and as the common
/// input form of the reference convolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntMap {
    shape: Shape3,
    data: Vec<i32>,
}

impl IntMap {
    pub fn zeros(shape: Shape3) -> Self {
        Self { shape, data: vec![0; shape.len()] }
    }

    pub fn from_vec(shape: Shape3, data: Vec<i32>) -> Result<Self, SnnError> {
        if data.len() != shape.len() {
            return Err(SnnError::DimensionMismatch(format!(
                "int map {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> i32 {
        self.data[self.shape.index(c, y, x)]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: i32) {
        let i = self.shape.index(c, y, x);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i32] {
        &mut self.data
    }
}

/// Unsigned 8-bit input image, `[C][H][W]`. A value `u` stands for `u / 256`
/// of the normalized input range.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageTensor {
    shape: Shape3,
    data: Vec<u8>,
}

impl ImageTensor {
    pub fn zeros(shape: Shape3) -> Self {
        Self { shape, data: vec![0; shape.len()] }
    }

    pub fn from_vec(shape: Shape3, data: Vec<u8>) -> Result<Self, SnnError> {
        if data.len() != shape.len() {
            return Err(SnnError::DimensionMismatch(format!(
                "image {shape} needs {} bytes, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> u8 {
        self.data[self.shape.index(c, y, x)]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn zero_padded(&self, pad: usize) -> ImageTensor {
        if pad == 0 {
            return self.clone();
        }
        let shape = self.shape.padded(pad);
        let mut data = vec![0u8; shape.len()];
        for c in 0..self.shape.channels {
            for y in 0..self.shape.height {
                for x in 0..self.shape.width {
                    data[shape.index(c, y + pad, x + pad)] = self.get(c, y, x);
                }
            }
        }
        ImageTensor { shape, data }
    }

    pub fn to_int_map(&self) -> IntMap {
        IntMap { shape: self.shape, data: self.data.iter().map(|&v| v as i32).collect() }
    }
}

/// Binary weights in `{-1, +1}`, stored as one sign bit each (1 means -1).
/// Layout is `[out][in][kh][kw]`, packed LSB first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryWeightTensor {
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    sign_bits: Vec<u8>,
}

impl BinaryWeightTensor {
    /// Builds from sign bits (`true` encodes weight -1).
    pub fn from_sign_bits(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        signs: &[bool],
    ) -> Result<Self, SnnError> {
        let n = out_channels * in_channels * kh * kw;
        if n == 0 || signs.len() != n {
            return Err(SnnError::DimensionMismatch(format!(
                "weight tensor {out_channels}x{in_channels}x{kh}x{kw} needs {n} signs, got {}",
                signs.len()
            )));
        }
        Ok(Self { out_channels, in_channels, kh, kw, sign_bits: crate::bits::pack(signs) })
    }

    /// Builds from logical weights; every value must be -1 or +1.
    pub fn from_weights(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        weights: &[i8],
    ) -> Result<Self, SnnError> {
        let signs = weights
            .iter()
            .map(|&w| match w {
                1 => Ok(false),
                -1 => Ok(true),
                other => Err(SnnError::InvalidParameter(format!("binary weight {other} is not +-1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_sign_bits(out_channels, in_channels, kh, kw, &signs)
    }

    pub fn from_packed(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        packed: Vec<u8>,
    ) -> Result<Self, SnnError> {
        let n = out_channels * in_channels * kh * kw;
        if n == 0 || packed.len() != n.div_ceil(8) {
            return Err(SnnError::DimensionMismatch(format!(
                "packed weights {out_channels}x{in_channels}x{kh}x{kw} need {} bytes, got {}",
                n.div_ceil(8),
                packed.len()
            )));
        }
        Ok(Self { out_channels, in_channels, kh, kw, sign_bits: packed })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.out_channels, self.in_channels, self.kh, self.kw)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    pub fn len(&self) -> usize {
        self.out_channels * self.in_channels * self.kh * self.kw
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn flat(&self, o: usize, i: usize, y: usize, x: usize) -> usize {
        ((o * self.in_channels + i) * self.kh + y) * self.kw + x
    }

    /// Stored bit: `true` for weight -1.
    pub fn sign_bit(&self, o: usize, i: usize, y: usize, x: usize) -> bool {
        let n = self.flat(o, i, y, x);
        (self.sign_bits[n / 8] >> (n % 8)) & 1 == 1
    }

    /// Logical weight `1 - 2b`.
    pub fn weight(&self, o: usize, i: usize, y: usize, x: usize) -> i32 {
        1 - 2 * self.sign_bit(o, i, y, x) as i32
    }

    pub fn packed(&self) -> &[u8] {
        &self.sign_bits
    }

    /// Same weights viewed as `[out][in*kh*kw][1][1]`, the fc layout.
    pub fn reshaped_1x1(&self) -> BinaryWeightTensor {
        BinaryWeightTensor {
            out_channels: self.out_channels,
            in_channels: self.in_channels * self.kh * self.kw,
            kh: 1,
            kw: 1,
            sign_bits: self.sign_bits.clone(),
        }
    }
}
