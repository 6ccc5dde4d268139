//! Brute-force reference convolution and pooling.

use super::{BinaryWeightTensor, IntMap, Shape3, SnnError, SpikeMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    Zero(usize),
}

impl Padding {
    pub fn amount(&self) -> usize {
        match *self {
            Padding::Valid => 0,
            Padding::Zero(p) => p,
        }
    }
}

/// Dense stride-1 cross-correlation with `{-1,+1}` weights in exact integer
/// arithmetic. Out-of-range taps read zero when `padding` is non-zero.
pub fn conv2d_oracle(
    input: &IntMap,
    weights: &BinaryWeightTensor,
    padding: Padding,
) -> Result<IntMap, SnnError> {
    let s = input.shape();
    let (cout, cin, kh, kw) = weights.dims();
    if cin != s.channels {
        return Err(SnnError::DimensionMismatch(format!(
            "weights expect {cin} input channels, input has {}",
            s.channels
        )));
    }
    let pad = padding.amount();
    let (hp, wp) = (s.height + 2 * pad, s.width + 2 * pad);
    if kh > hp || kw > wp {
        return Err(SnnError::DimensionMismatch(format!(
            "{kh}x{kw} kernel does not fit padded {hp}x{wp} input"
        )));
    }
    let out_shape = Shape3::new(cout, hp - kh + 1, wp - kw + 1);
    let mut out = IntMap::zeros(out_shape);
    for o in 0..cout {
        for y in 0..out_shape.height {
            for x in 0..out_shape.width {
                let mut acc = 0i32;
                for i in 0..cin {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let (iy, ix) = ((y + dy) as isize - pad as isize, (x + dx) as isize - pad as isize);
                            if iy < 0 || ix < 0 || iy as usize >= s.height || ix as usize >= s.width {
                                continue;
                            }
                            acc += weights.weight(o, i, dy, dx) * input.get(i, iy as usize, ix as usize);
                        }
                    }
                }
                out.set(o, y, x, acc);
            }
        }
    }
    Ok(out)
}

/// 2x2 stride-2 max pooling; on binary maps this is a window OR.
pub fn maxpool2_oracle(spikes: &SpikeMap) -> Result<SpikeMap, SnnError> {
    let s = spikes.shape();
    if !s.height.is_multiple_of(2) || !s.width.is_multiple_of(2) {
        return Err(SnnError::OddDimensions { height: s.height, width: s.width });
    }
    let mut out = SpikeMap::zeros(Shape3::new(s.channels, s.height / 2, s.width / 2));
    for c in 0..s.channels {
        for y in 0..s.height / 2 {
            for x in 0..s.width / 2 {
                let any = (0..2).any(|dy| (0..2).any(|dx| spikes.get(c, 2 * y + dy, 2 * x + dx)));
                out.set(c, y, x, any);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_input_gives_zero_output() {
        let input = IntMap::zeros(Shape3::new(2, 5, 5));
        let w = BinaryWeightTensor::from_sign_bits(3, 2, 3, 3, &[true; 54]).unwrap();
        let out = conv2d_oracle(&input, &w, Padding::Zero(1)).unwrap();
        assert_eq!(out.shape(), Shape3::new(3, 5, 5));
        assert!(out.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn unit_kernel_identity() {
        let input = IntMap::from_vec(Shape3::new(1, 1, 1), vec![1]).unwrap();
        let w = BinaryWeightTensor::from_weights(1, 1, 1, 1, &[1]).unwrap();
        assert_eq!(conv2d_oracle(&input, &w, Padding::Valid).unwrap().data(), &[1]);
    }

    #[test]
    fn five_by_five_valid_fixture() {
        // Plus-shaped kernel signs against a diagonal spike pattern, summed by hand.
        let mut m = SpikeMap::zeros(Shape3::new(1, 5, 5));
        for i in 0..5 {
            m.set(0, i, i, true);
        }
        m.set(0, 0, 4, true);
        let w = BinaryWeightTensor::from_weights(1, 1, 3, 3, &[-1, 1, -1, 1, 1, 1, -1, 1, -1]).unwrap();
        let out = conv2d_oracle(&m.to_int_map(), &w, Padding::Valid).unwrap();
        assert_eq!(out.shape(), Shape3::new(1, 3, 3));
        // Window (0,0) covers diagonal (0,0),(1,1),(2,2): -1 + 1 - 1.
        assert_eq!(out.get(0, 0, 0), -1);
        // Window (0,2) covers (0,4) corner (-1), (2,2) corner (-1) and no others.
        assert_eq!(out.get(0, 0, 2), -2);
        // Window (1,1) covers (1,1),(2,2),(3,3): corner, centre, corner.
        assert_eq!(out.get(0, 1, 1), -1);
    }

    #[test]
    fn mismatched_channels_rejected() {
        let input = IntMap::zeros(Shape3::new(2, 3, 3));
        let w = BinaryWeightTensor::from_weights(1, 1, 1, 1, &[1]).unwrap();
        assert!(conv2d_oracle(&input, &w, Padding::Valid).is_err());
        let w = BinaryWeightTensor::from_sign_bits(1, 2, 5, 5, &[false; 50]).unwrap();
        assert!(conv2d_oracle(&input, &w, Padding::Valid).is_err());
    }

    #[test]
    fn pooling_examples() {
        let zeros = SpikeMap::zeros(Shape3::new(1, 4, 4));
        assert_eq!(maxpool2_oracle(&zeros).unwrap().count_ones(), 0);
        let mut one = zeros.clone();
        one.set(0, 3, 2, true);
        let p = maxpool2_oracle(&one).unwrap();
        assert!(p.get(0, 1, 1));
        assert_eq!(p.count_ones(), 1);
        assert!(matches!(
            maxpool2_oracle(&SpikeMap::zeros(Shape3::new(1, 3, 4))),
            Err(SnnError::OddDimensions { .. })
        ));
    }

    fn int_map(shape: Shape3) -> impl Strategy<Value = IntMap> {
        proptest::collection::vec(-50i32..50, shape.len()).prop_map(move |v| IntMap::from_vec(shape, v).unwrap())
    }

    proptest! {
        #[test]
        fn convolution_is_linear(
            a in int_map(Shape3::new(2, 6, 5)),
            b in int_map(Shape3::new(2, 6, 5)),
            signs in proptest::collection::vec(any::<bool>(), 3 * 2 * 9),
        ) {
            let w = BinaryWeightTensor::from_sign_bits(3, 2, 3, 3, &signs).unwrap();
            let sum = IntMap::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap();
            let ca = conv2d_oracle(&a, &w, Padding::Zero(1)).unwrap();
            let cb = conv2d_oracle(&b, &w, Padding::Zero(1)).unwrap();
            let cs = conv2d_oracle(&sum, &w, Padding::Zero(1)).unwrap();
            for i in 0..cs.data().len() {
                prop_assert_eq!(ca.data()[i] + cb.data()[i], cs.data()[i]);
            }
        }

        #[test]
        fn pooling_matches_window_max(bits in proptest::collection::vec(any::<bool>(), 16)) {
            let m = SpikeMap::from_bits(Shape3::new(1, 4, 4), bits.clone()).unwrap();
            let p = maxpool2_oracle(&m).unwrap();
            for y in 0..2 {
                for x in 0..2 {
                    let window = [bits[8 * y + 2 * x], bits[8 * y + 2 * x + 1], bits[8 * y + 4 + 2 * x], bits[8 * y + 5 + 2 * x]];
                    prop_assert_eq!(p.get(0, y, x), window.iter().copied().max().unwrap());
                }
            }
        }
    }
}
