//! Processing elements and PE arrays.

/// Two-bit two's-complement product of a spike and a sign-coded weight:
/// high bit `s AND w`, low bit `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeProduct(u8);

impl PeProduct {
    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn high(self) -> bool {
        self.0 & 0b10 != 0
    }

    pub fn low(self) -> bool {
        self.0 & 0b01 != 0
    }

    /// Sign-extended value in `{-1, 0, +1}`.
    pub fn value(self) -> i32 {
        (((self.0 << 6) as i8) >> 6) as i32
    }
}

/// AND-gate multiply of spike `s` with weight sign bit `w_sign` (1 means -1).
pub fn pe_multiply(s: bool, w_sign: bool) -> PeProduct {
    PeProduct((((s & w_sign) as u8) << 1) | s as u8)
}

/// An `R x K` PE array. Input column bits broadcast along rows, weight sign
/// bits along columns, and products are summed along diagonals into
/// `R + K - 1` partial-sum registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeArray {
    rows: usize,
    cols: usize,
    partial: Vec<i32>,
}

impl PeArray {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, partial: vec![0; rows + cols - 1] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn registers(&self) -> &[i32] {
        &self.partial
    }

    /// One cycle. `input` holds up to `R` column bits (missing rows are idle)
    /// and `weight_col` the top-to-bottom sign bits of one filter column, at
    /// most `K` of them. PE `(r, k)` multiplies `input[r]` with the filter tap
    /// `kh - 1 - k`, so register `j` collects the correlation output whose
    /// window starts at input row `j - (kh - 1)`.
    ///
    /// Returns the number of PEs that did useful work.
    pub fn cycle(&mut self, input: &[bool], weight_col: &[bool]) -> usize {
        let kh = weight_col.len();
        assert!(input.len() <= self.rows && kh <= self.cols, "column does not fit the array");
        for (r, &s) in input.iter().enumerate() {
            if !s {
                continue;
            }
            for k in 0..kh {
                self.partial[r + k] += pe_multiply(s, weight_col[kh - 1 - k]).value();
            }
        }
        input.len() * kh
    }

    pub fn clear(&mut self) {
        self.partial.iter_mut().for_each(|v| *v = 0);
    }

    /// Reads out and clears the partial-sum registers.
    pub fn drain(&mut self) -> Vec<i32> {
        let out = self.partial.clone();
        self.clear();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truth_table() {
        assert_eq!((pe_multiply(false, false).value(), pe_multiply(false, false).bits()), (0, 0b00));
        assert_eq!((pe_multiply(false, true).value(), pe_multiply(false, true).bits()), (0, 0b00));
        assert_eq!((pe_multiply(true, false).value(), pe_multiply(true, false).bits()), (1, 0b01));
        assert_eq!((pe_multiply(true, true).value(), pe_multiply(true, true).bits()), (-1, 0b11));
        for s in [false, true] {
            for w in [false, true] {
                assert_eq!(pe_multiply(s, w).value(), s as i32 * (1 - 2 * w as i32));
                assert_eq!(pe_multiply(s, w).high(), s && w);
                assert_eq!(pe_multiply(s, w).low(), s);
            }
        }
    }

    #[test]
    fn register_count() {
        assert_eq!(PeArray::new(8, 3).registers().len(), 10);
    }

    #[test]
    fn zero_column_leaves_registers() {
        let mut a = PeArray::new(8, 3);
        a.cycle(&[true; 8], &[false, true, false]);
        let before = a.registers().to_vec();
        a.cycle(&[false; 8], &[true, true, true]);
        assert_eq!(a.registers(), &before[..]);
    }

    #[test]
    fn five_row_all_ones() {
        let mut a = PeArray::new(5, 3);
        assert_eq!(a.cycle(&[true; 5], &[false; 3]), 15);
        assert_eq!(a.drain(), vec![1, 2, 3, 3, 3, 2, 1]);
        assert!(a.registers().iter().all(|&v| v == 0));
    }

    proptest! {
        #[test]
        fn equals_one_dimensional_correlation(
            input in proptest::collection::vec(any::<bool>(), 8),
            signs in proptest::collection::vec(any::<bool>(), 3),
        ) {
            let mut a = PeArray::new(8, 3);
            a.cycle(&input, &signs);
            let regs = a.drain();
            // Register j holds sum_d input[j - 2 + d] * w[d] over in-range rows.
            for (j, &got) in regs.iter().enumerate() {
                let mut want = 0;
                for d in 0..3 {
                    let r = j as isize - 2 + d as isize;
                    if (0..8).contains(&r) {
                        want += input[r as usize] as i32 * (1 - 2 * signs[d] as i32);
                    }
                }
                prop_assert_eq!(got, want);
                prop_assert!(got.abs() <= 3);
            }
        }
    }
}
