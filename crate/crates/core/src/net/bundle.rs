//! Model bundles: network + binary weights + folded neuron parameters.
//!
//! On-disk layout (all integers little-endian):
//!
//! ```text
//! "VSA1"
//! u32 text_len, text            canonical network string
//! u32 C, u32 H, u32 W           input dimensions
//! u8 total_bits, u8 frac_bits   fixed-point format of folded params
//! u32 n                         number of compute layers
//! n x {
//!   u32 layer index, u32 out, u32 in, u32 kh, u32 kw
//!   ceil(out*in*kh*kw / 8)      sign bits, LSB first (1 = weight -1)
//!   out x {bias, threshold}     each ceil(total_bits/8) bytes, two's complement
//!   ceil(out / 8)               compare-flipped flags, LSB first
//! }
//! 32 bytes                      SHA-256 of everything above
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fixed::QFormat;
use crate::snn::{BinaryWeightTensor, BnParams, FoldedChannel, FoldedNeuronParams, ImageTensor, Shape3, SnnError};

use super::desc::{parse_network, LayerKind, NetworkDescription};
use super::validate::{validate, AnnotatedNetwork, ValidationError};

pub const BUNDLE_MAGIC: &[u8; 4] = b"VSA1";
const CHECKSUM_LEN: usize = 32;

/// Scale applied to the encoding layer's folded parameters: pixel `u` means `u/256`.
pub const ENCODING_INPUT_SCALE: f64 = 256.0;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bad magic: expected \"VSA1\"")]
    BadMagic,
    #[error("checksum mismatch")]
    Checksum,
    #[error("truncated bundle: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Snn(#[from] SnnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Weights and folded neuron parameters of one compute layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerParams {
    pub weights: BinaryWeightTensor,
    pub folded: FoldedNeuronParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub net: NetworkDescription,
    pub input_shape: Shape3,
    pub format: QFormat,
    /// One entry per network layer; `None` for pooling layers.
    pub layers: Vec<Option<LayerParams>>,
}

impl ModelBundle {
    /// Checks shapes, and that every compute layer has parameters of matching size.
    pub fn annotated(&self) -> Result<AnnotatedNetwork, BundleError> {
        let a = validate(&self.net, self.input_shape)?;
        if self.layers.len() != a.layers.len() {
            return Err(BundleError::Malformed(format!(
                "{} parameter slots for {} layers",
                self.layers.len(),
                a.layers.len()
            )));
        }
        for (layer, params) in a.layers.iter().zip(&self.layers) {
            let bad = |m: String| BundleError::Malformed(format!("layer {}: {m}", layer.index));
            match (layer.spec.kind.is_compute(), params) {
                (false, None) => {}
                (false, Some(_)) => return Err(bad("pooling layer carries parameters".into())),
                (true, None) => return Err(bad("missing parameters".into())),
                (true, Some(p)) => {
                    let want = (layer.output.channels, layer.input.channels, layer.spec.kernel.0, layer.spec.kernel.1);
                    if p.weights.dims() != want {
                        return Err(bad(format!("weights {:?}, expected {want:?}", p.weights.dims())));
                    }
                    if p.folded.len() != layer.output.channels || p.folded.format != self.format {
                        return Err(bad("folded parameters do not match the layer".into()));
                    }
                }
            }
        }
        Ok(a)
    }

    pub fn params(&self, layer: usize) -> Option<&LayerParams> {
        self.layers.get(layer).and_then(Option::as_ref)
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BUNDLE_MAGIC);
        let text = self.net.to_string();
        put_u32(&mut out, text.len());
        out.extend_from_slice(text.as_bytes());
        for d in [self.input_shape.channels, self.input_shape.height, self.input_shape.width] {
            put_u32(&mut out, d);
        }
        out.push(self.format.total_bits as u8);
        out.push(self.format.frac_bits as u8);
        let compute: Vec<_> = self.layers.iter().enumerate().filter_map(|(i, p)| p.as_ref().map(|p| (i, p))).collect();
        put_u32(&mut out, compute.len());
        let width = self.format.byte_width() as usize;
        for (index, p) in compute {
            put_u32(&mut out, index);
            let (o, i, kh, kw) = p.weights.dims();
            for d in [o, i, kh, kw] {
                put_u32(&mut out, d);
            }
            out.extend_from_slice(p.weights.packed());
            for ch in &p.folded.channels {
                for raw in [ch.bias, ch.threshold] {
                    let word = self.format.to_word(raw);
                    out.extend_from_slice(&word.to_le_bytes()[..width]);
                }
            }
            let flags: Vec<bool> = p.folded.channels.iter().map(|c| c.flipped).collect();
            out.extend_from_slice(&crate::bits::pack(&flags));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.payload();
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// SHA-256 of the serialized content.
    pub fn checksum(&self) -> [u8; 32] {
        Sha256::digest(self.payload()).into()
    }

    pub fn checksum_hex(&self) -> String {
        self.checksum().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4)? != BUNDLE_MAGIC {
            return Err(BundleError::BadMagic);
        }
        let text_len = r.u32()?;
        let text = std::str::from_utf8(r.take(text_len)?)
            .map_err(|_| BundleError::Malformed("network text is not UTF-8".into()))?;
        let net = parse_network(text).map_err(|e| BundleError::Malformed(e.to_string()))?;
        let input_shape = Shape3::new(r.u32()?, r.u32()?, r.u32()?);
        let (total_bits, frac_bits) = (r.take(1)?[0] as u32, r.take(1)?[0] as u32);
        if !(2..=48).contains(&total_bits) || frac_bits >= total_bits {
            return Err(BundleError::Malformed(format!("fixed-point format Q{total_bits}.{frac_bits}")));
        }
        let format = QFormat::new(total_bits, frac_bits);
        let count = r.u32()?;
        let mut layers: Vec<Option<LayerParams>> = vec![None; net.len()];
        let width = format.byte_width() as usize;
        for _ in 0..count {
            let index = r.u32()?;
            let (o, i, kh, kw) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
            let n = o
                .checked_mul(i)
                .and_then(|v| v.checked_mul(kh))
                .and_then(|v| v.checked_mul(kw))
                .ok_or_else(|| BundleError::Malformed("weight dimensions overflow".into()))?;
            let packed = r.take(n.div_ceil(8))?.to_vec();
            let weights = BinaryWeightTensor::from_packed(o, i, kh, kw, packed)?;
            let mut words = Vec::with_capacity(2 * o);
            for _ in 0..2 * o {
                let mut buf = [0u8; 8];
                buf[..width].copy_from_slice(r.take(width)?);
                words.push(format.sign_extend(u64::from_le_bytes(buf)));
            }
            let flags = crate::bits::unpack(r.take(o.div_ceil(8))?, o);
            let channels = (0..o)
                .map(|c| FoldedChannel { bias: words[2 * c], threshold: words[2 * c + 1], flipped: flags[c] })
                .collect();
            let slot = layers
                .get_mut(index)
                .ok_or_else(|| BundleError::Malformed(format!("layer index {index} out of range")))?;
            if slot.is_some() {
                return Err(BundleError::Malformed(format!("duplicate layer {index}")));
            }
            *slot = Some(LayerParams { weights, folded: FoldedNeuronParams { format, channels } });
        }
        let body_end = r.pos;
        let stored = r.take(CHECKSUM_LEN)?;
        if r.pos != bytes.len() {
            return Err(BundleError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
            return Err(BundleError::Checksum);
        }
        let bundle = ModelBundle { net, input_shape, format, layers };
        bundle.annotated()?;
        Ok(bundle)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BundleError> {
        let rest = self.bytes.len() - self.pos;
        if n > rest {
            return Err(BundleError::Truncated { offset: self.pos, needed: n - rest });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, BundleError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<(), BundleError> {
    std::fs::File::create(path)?.write_all(&bundle.to_bytes())?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle, BundleError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    ModelBundle::from_bytes(&bytes)
}

/// Random batch-norm statistics used by [`generate_random_bundle`].
pub fn random_bn(rng: &mut impl Rng, eps: f64) -> BnParams {
    BnParams {
        gamma: rng.random_range(0.5..=2.0),
        beta: rng.random_range(-1.0..=1.0),
        mean: rng.random_range(-1.0..=1.0),
        var: rng.random_range(0.25..=4.0),
        eps,
    }
}

/// Deterministic random signs and batch-norm statistics for every compute
/// layer, folded with each layer's `v_th`.
pub fn generate_random_bundle(
    net: &AnnotatedNetwork,
    seed: u64,
    format: QFormat,
    eps: f64,
) -> Result<ModelBundle, BundleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        if !layer.spec.kind.is_compute() {
            layers.push(None);
            continue;
        }
        let (kh, kw) = layer.spec.kernel;
        let (cout, cin) = (layer.output.channels, layer.input.channels);
        let signs: Vec<bool> = (0..cout * cin * kh * kw).map(|_| rng.random()).collect();
        let weights = BinaryWeightTensor::from_sign_bits(cout, cin, kh, kw, &signs)?;
        let bn: Vec<BnParams> = (0..cout).map(|_| random_bn(&mut rng, eps)).collect();
        let scale = if layer.spec.kind == LayerKind::EncodingConv { ENCODING_INPUT_SCALE } else { 1.0 };
        let folded = FoldedNeuronParams::fold(&bn, layer.spec.v_th, format, scale)?;
        layers.push(Some(LayerParams { weights, folded }));
    }
    Ok(ModelBundle { net: net.description(), input_shape: net.input, format, layers })
}

/// Uniform random 8-bit image.
pub fn random_image(shape: Shape3, seed: u64) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.len()).map(|_| rng.random()).collect();
    ImageTensor::from_vec(shape, data).expect("length matches shape")
}

/// Raw input tensor file: `u32 C, u32 H, u32 W` little-endian, then row-major bytes.
pub fn write_input_tensor(image: &ImageTensor, path: impl AsRef<Path>) -> std::io::Result<()> {
    let s = image.shape();
    let mut out = Vec::with_capacity(12 + s.len());
    for d in [s.channels, s.height, s.width] {
        put_u32(&mut out, d);
    }
    out.extend_from_slice(image.data());
    std::fs::write(path, out)
}

pub fn read_input_tensor(path: impl AsRef<Path>) -> Result<ImageTensor, BundleError> {
    let bytes = std::fs::read(path)?;
    let mut r = Cursor { bytes: &bytes, pos: 0 };
    let shape = Shape3::new(r.u32()?, r.u32()?, r.u32()?);
    let data = r.take(shape.len())?.to_vec();
    if r.pos != bytes.len() {
        return Err(BundleError::Malformed(format!("{} trailing bytes in input tensor", bytes.len() - r.pos)));
    }
    Ok(ImageTensor::from_vec(shape, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::presets::Preset;

    fn mnist_bundle(seed: u64) -> ModelBundle {
        let a = validate(&Preset::Mnist.network(), Preset::Mnist.input_shape()).unwrap();
        generate_random_bundle(&a, seed, QFormat::Q24_8, crate::snn::DEFAULT_BN_EPS).unwrap()
    }

    #[test]
    fn same_seed_same_bundle() {
        assert_eq!(mnist_bundle(3).checksum(), mnist_bundle(3).checksum());
        assert_ne!(mnist_bundle(3).checksum(), mnist_bundle(4).checksum());
    }

    #[test]
    fn seed_zero_mnist_golden_checksum() {
        assert_eq!(
            mnist_bundle(0).checksum_hex(),
            "a27fdef72464437a33f91e762a325a09a7348eabcc67ad9eac886439d8a03cf6"
        );
    }

    #[test]
    fn byte_round_trip() {
        let b = mnist_bundle(1);
        let bytes = b.to_bytes();
        assert_eq!(ModelBundle::from_bytes(&bytes).unwrap(), b);
    }

    #[test]
    fn corruption_kinds_are_distinguishable() {
        let bytes = mnist_bundle(1).to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(ModelBundle::from_bytes(&bad), Err(BundleError::BadMagic)));

        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() ^= 0x01;
        assert!(matches!(ModelBundle::from_bytes(&bad), Err(BundleError::Checksum)));

        // Flipping a weight byte is caught by the checksum as well.
        let mut bad = bytes.clone();
        bad[200] ^= 0x80;
        assert!(matches!(ModelBundle::from_bytes(&bad), Err(BundleError::Checksum)));

        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(ModelBundle::from_bytes(cut), Err(BundleError::Truncated { .. })));
        let cut = &bytes[..bytes.len() - 1];
        assert!(matches!(ModelBundle::from_bytes(cut), Err(BundleError::Truncated { .. })));
    }

    #[test]
    fn parameter_ranges() {
        let b = mnist_bundle(9);
        for p in b.layers.iter().flatten() {
            for c in &p.folded.channels {
                // gamma > 0 for generated statistics
                assert!(!c.flipped);
                assert!(c.threshold > 0);
            }
        }
    }
}
