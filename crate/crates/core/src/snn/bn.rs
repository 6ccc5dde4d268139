//! Batch-norm folding into the IF neuron.
//!
//! A batch-normalized convolution output `g*(x - mu)/sigma + beta` that is
//! integrated and compared against `v_th` fires exactly when the raw output,
//! shifted by `mu - (sigma/g)*beta`, is integrated and compared against
//! `(sigma/g)*v_th`. Dividing by a negative `g` flips the comparison.

use serde::{Deserialize, Serialize};

use crate::fixed::QFormat;

use super::neuron::FireRule;
use super::SnnError;

pub const DEFAULT_BN_EPS: f64 = 1e-5;

/// Batch-norm statistics for one output channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnParams {
    pub gamma: f64,
    pub beta: f64,
    pub mean: f64,
    pub var: f64,
    pub eps: f64,
}

impl BnParams {
    pub fn identity() -> Self {
        Self { gamma: 1.0, beta: 0.0, mean: 0.0, var: 1.0, eps: 0.0 }
    }

    pub fn std_dev(&self) -> f64 {
        (self.var + self.eps).sqrt()
    }

    pub fn validate(&self) -> Result<(), SnnError> {
        if self.gamma == 0.0 || !self.gamma.is_finite() {
            return Err(SnnError::InvalidParameter(format!("gamma must be non-zero, got {}", self.gamma)));
        }
        if !(self.var >= 0.0) || !(self.eps >= 0.0) {
            return Err(SnnError::InvalidParameter(format!(
                "variance and epsilon must be >= 0, got var={} eps={}",
                self.var, self.eps
            )));
        }
        Ok(())
    }

    /// Normalized value `gamma * (x - mean) / sqrt(var + eps) + beta`.
    pub fn apply(&self, x: f64) -> f64 {
        self.gamma * (x - self.mean) / self.std_dev() + self.beta
    }
}

/// Folded bias and threshold of one channel, raw fixed-point words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FoldedChannel {
    pub bias: i64,
    pub threshold: i64,
    pub flipped: bool,
}

impl FoldedChannel {
    pub fn fire_rule(&self) -> FireRule {
        FireRule { threshold: self.threshold, flipped: self.flipped }
    }
}

/// Per-output-channel folded neuron parameters of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FoldedNeuronParams {
    pub format: QFormat,
    pub channels: Vec<FoldedChannel>,
}

impl FoldedNeuronParams {
    pub fn fold(bn: &[BnParams], v_th: f64, format: QFormat, input_scale: f64) -> Result<Self, SnnError> {
        let channels = bn
            .iter()
            .map(|p| fold_bn_scaled(p, v_th, format, input_scale))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { format, channels })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// Folds one channel's batch norm into `(bias, threshold, flipped)`.
pub fn fold_bn(p: &BnParams, v_th: f64, format: QFormat) -> Result<FoldedChannel, SnnError> {
    fold_bn_scaled(p, v_th, format, 1.0)
}

/// Like [`fold_bn`], with bias and threshold multiplied by `input_scale`
/// before quantization. The encoding layer uses 256 so that integer
/// convolutions of 8-bit pixels can be compared directly.
pub fn fold_bn_scaled(
    p: &BnParams,
    v_th: f64,
    format: QFormat,
    input_scale: f64,
) -> Result<FoldedChannel, SnnError> {
    p.validate()?;
    let ratio = p.std_dev() / p.gamma;
    let bias = (p.mean - ratio * p.beta) * input_scale;
    let threshold = ratio * v_th * input_scale;
    Ok(FoldedChannel {
        bias: format.from_real(bias)?,
        threshold: format.from_real(threshold)?,
        flipped: p.gamma < 0.0,
    })
}

/// Floating-point reference of the unfolded pipeline: normalize each step,
/// integrate with hard reset, fire against `v_th`. Only used to check
/// [`fold_bn`].
pub fn unfolded_bn_spikes(x: &[f64], p: &BnParams, v_th: f64) -> Vec<bool> {
    let mut v = 0.0;
    let mut fired = false;
    x.iter()
        .map(|&xt| {
            if fired {
                v = 0.0;
            }
            v += p.apply(xt);
            fired = v >= v_th;
            fired
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: QFormat = QFormat::Q24_8;

    fn real(raw: i64) -> f64 {
        Q.to_real(raw)
    }

    #[test]
    fn identity_bn() {
        let f = fold_bn(&BnParams::identity(), 1.0, Q).unwrap();
        assert_eq!((real(f.bias), real(f.threshold), f.flipped), (0.0, 1.0, false));
    }

    #[test]
    fn scaled_bn() {
        let p = BnParams { gamma: 2.0, beta: 1.0, mean: 0.5, var: 4.0, eps: 0.0 };
        let f = fold_bn(&p, 1.0, Q).unwrap();
        assert_eq!((real(f.bias), real(f.threshold), f.flipped), (-0.5, 1.0, false));
    }

    #[test]
    fn negative_gamma_flips() {
        let p = BnParams { gamma: -1.0, ..BnParams::identity() };
        let f = fold_bn(&p, 1.0, Q).unwrap();
        assert_eq!((real(f.bias), real(f.threshold), f.flipped), (0.0, -1.0, true));
    }

    #[test]
    fn zero_gamma_rejected() {
        let p = BnParams { gamma: 0.0, ..BnParams::identity() };
        assert!(matches!(fold_bn(&p, 1.0, Q), Err(SnnError::InvalidParameter(_))));
        let p = BnParams { var: -1.0, ..BnParams::identity() };
        assert!(fold_bn(&p, 1.0, Q).is_err());
    }

    #[test]
    fn epsilon_enters_the_square_root() {
        let p = BnParams { gamma: 1.0, beta: 0.0, mean: 0.0, var: 3.0, eps: 1.0 };
        let f = fold_bn(&p, 1.0, Q).unwrap();
        assert_eq!(real(f.threshold), 2.0);
    }

    #[test]
    fn input_scale_prescales_both_terms() {
        let p = BnParams { gamma: 2.0, beta: 1.0, mean: 0.5, var: 4.0, eps: 0.0 };
        let f = fold_bn_scaled(&p, 1.0, Q, 256.0).unwrap();
        assert_eq!((real(f.bias), real(f.threshold)), (-128.0, 256.0));
    }

    #[test]
    fn quantization_within_one_lsb() {
        let p = BnParams { gamma: 0.7, beta: 0.33, mean: -0.21, var: 1.9, eps: 1e-5 };
        let f = fold_bn(&p, 1.3, Q).unwrap();
        let ratio = p.std_dev() / p.gamma;
        assert!((real(f.bias) - (p.mean - ratio * p.beta)).abs() <= Q.resolution() / 2.0);
        assert!((real(f.threshold) - ratio * 1.3).abs() <= Q.resolution() / 2.0);
    }

    #[test]
    fn unfolded_reference_examples() {
        let id = BnParams::identity();
        assert_eq!(unfolded_bn_spikes(&[0.0, 0.0, 0.0], &id, 1.0), vec![false; 3]);
        assert_eq!(unfolded_bn_spikes(&[0.6, 0.6], &id, 1.0), vec![false, true]);
        // fire, reset, then 0.6 alone stays below threshold
        assert_eq!(unfolded_bn_spikes(&[0.6, 0.6, 0.6], &id, 1.0), vec![false, true, false]);
    }
}
