//! Integrate-and-fire dynamics on fixed-point membrane potentials.

use crate::fixed::{FixedOverflow, QFormat};

use super::Shape3;

/// Firing comparison for one channel: `V >= threshold`, or `V <= threshold`
/// when the folded batch-norm scale was negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FireRule {
    pub threshold: i64,
    pub flipped: bool,
}

impl FireRule {
    pub fn fires(&self, v: i64) -> bool {
        if self.flipped {
            v <= self.threshold
        } else {
            v >= self.threshold
        }
    }
}

/// One membrane update followed by the firing test.
///
/// `V_new = V_prev * (1 - o_prev) + input`: a neuron that fired on the previous
/// step starts again from zero before integrating (hard reset).
pub fn if_step(
    fmt: &QFormat,
    v_prev: i64,
    fired_prev: bool,
    input: i64,
    rule: FireRule,
) -> Result<(i64, bool), FixedOverflow> {
    let base = if fired_prev { 0 } else { v_prev };
    let v = fmt.add(base, input)?;
    Ok((v, rule.fires(v)))
}

/// Per-position membrane potentials and last-step spikes of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembraneState {
    pub format: QFormat,
    shape: Shape3,
    potentials: Vec<i64>,
    fired: Vec<bool>,
}

impl MembraneState {
    pub fn new(format: QFormat, shape: Shape3) -> Self {
        Self { format, shape, potentials: vec![0; shape.len()], fired: vec![false; shape.len()] }
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn potential(&self, i: usize) -> i64 {
        self.potentials[i]
    }

    pub fn fired(&self, i: usize) -> bool {
        self.fired[i]
    }

    /// Integrates `input` at flat position `i`; returns the new spike.
    pub fn integrate(&mut self, i: usize, input: i64, rule: FireRule) -> Result<bool, FixedOverflow> {
        let (v, o) = if_step(&self.format, self.potentials[i], self.fired[i], input, rule)?;
        self.potentials[i] = v;
        self.fired[i] = o;
        Ok(o)
    }
}
