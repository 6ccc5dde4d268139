use crate::snn::{Shape3, SpikeMap};

use super::ArchError;

/// 2x2 max pooling of binary spikes, done as an OR of row pairs then column pairs.
pub fn or_pool2(spikes: &SpikeMap) -> Result<SpikeMap, ArchError> {
    let s = spikes.shape();
    if !s.height.is_multiple_of(2) || !s.width.is_multiple_of(2) {
        return Err(ArchError::Shape(format!("cannot pool odd map {s}")));
    }
    let out_shape = Shape3::new(s.channels, s.height / 2, s.width / 2);
    let mut out = SpikeMap::zeros(out_shape);
    let bits = spikes.bits();
    for c in 0..s.channels {
        for y in 0..out_shape.height {
            let top = &bits[s.index(c, 2 * y, 0)..][..s.width];
            let bottom = &bits[s.index(c, 2 * y + 1, 0)..][..s.width];
            let rows: Vec<bool> = top.iter().zip(bottom).map(|(a, b)| a | b).collect();
            for (x, pair) in rows.chunks(2).enumerate() {
                out.set(c, y, x, pair[0] | pair[1]);
            }
        }
    }
    Ok(out)
}
