//! Signed fixed-point arithmetic with explicit overflow faults.
//!
//! Values are carried as raw `i64` words interpreted under a [`QFormat`]:
//! `total_bits` wide (sign included) with `frac_bits` fractional bits. Every
//! arithmetic helper checks the result against the format range and reports a
//! [`FixedOverflow`] instead of wrapping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Result of an arithmetic operation leaving the representable range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("fixed-point overflow: raw value {value} does not fit in {total_bits} signed bits")]
pub struct FixedOverflow {
    pub value: i128,
    pub total_bits: u32,
}

/// A signed two's-complement fixed-point format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QFormat {
    pub total_bits: u32,
    pub frac_bits: u32,
}

impl Default for QFormat {
    fn default() -> Self {
        Self::Q24_8
    }
}

impl QFormat {
    /// 24-bit words with 8 fractional bits.
    pub const Q24_8: QFormat = QFormat { total_bits: 24, frac_bits: 8 };

    pub fn new(total_bits: u32, frac_bits: u32) -> Self {
        assert!(
            (2..=48).contains(&total_bits) && frac_bits < total_bits,
            "unsupported fixed-point format Q{total_bits}.{frac_bits}"
        );
        Self { total_bits, frac_bits }
    }

    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Weight of one least-significant bit, `2^-F`.
    pub fn resolution(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    /// Storage width in whole bytes.
    pub fn byte_width(&self) -> u32 {
        self.total_bits.div_ceil(8)
    }

    pub fn check(&self, value: i128) -> Result<i64, FixedOverflow> {
        if value < self.min_raw() as i128 || value > self.max_raw() as i128 {
            Err(FixedOverflow { value, total_bits: self.total_bits })
        } else {
            Ok(value as i64)
        }
    }

    /// Quantizes a real value with round-to-nearest, ties to even.
    pub fn from_real(&self, x: f64) -> Result<i64, FixedOverflow> {
        let scaled = (x * (self.frac_bits as f64).exp2()).round_ties_even();
        if !scaled.is_finite() || scaled.abs() > 1e30 {
            return Err(FixedOverflow {
                value: if scaled.is_sign_negative() { i128::MIN } else { i128::MAX },
                total_bits: self.total_bits,
            });
        }
        self.check(scaled as i128)
    }

    pub fn from_int(&self, x: i64) -> Result<i64, FixedOverflow> {
        self.check((x as i128) << self.frac_bits)
    }

    pub fn to_real(&self, raw: i64) -> f64 {
        raw as f64 * self.resolution()
    }

    pub fn add(&self, a: i64, b: i64) -> Result<i64, FixedOverflow> {
        self.check(a as i128 + b as i128)
    }

    pub fn sub(&self, a: i64, b: i64) -> Result<i64, FixedOverflow> {
        self.check(a as i128 - b as i128)
    }

    /// Sign-extends the low `total_bits` of `word`, as a register of this
    /// width would hold it.
    pub fn sign_extend(&self, word: u64) -> i64 {
        let shift = 64 - self.total_bits;
        ((word << shift) as i64) >> shift
    }

    /// Low `total_bits` of a raw value, for packed storage.
    pub fn to_word(&self, raw: i64) -> u64 {
        (raw as u64) & ((1u64 << self.total_bits) - 1)
    }
}
