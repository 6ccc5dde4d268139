//! Column-pipelined scheduling of one layer pass over the PE blocks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::snn::{BinaryWeightTensor, ImageTensor, IntMap, Shape3, SpikeMap};

use super::{accumulate_stage1, accumulate_tree, AccumMode, ArchError, GroupState, HardwareConfig, PeArray};

/// Cycle and PE-activity totals. Warmup and accumulator latency are kept
/// apart so both the warmup-inclusive and the steady-state view are available.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleReport {
    pub total_cycles: u64,
    pub warmup_cycles: u64,
    pub steady_cycles: u64,
    /// Layer passes, one per (output channel, channel group, tile).
    pub passes: u64,
    /// Accumulator pipeline fill, not part of `total_cycles`.
    pub accumulator_latency_cycles: u64,
    pub active_pe_cycles: u64,
    pub total_pe_cycles: u64,
    pub steady_pe_cycles: u64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl CycleReport {
    pub fn utilization(&self) -> f64 {
        ratio(self.active_pe_cycles, self.total_pe_cycles)
    }

    /// Utilization over the cycles that complete an output column.
    pub fn steady_utilization(&self) -> f64 {
        ratio(self.active_pe_cycles, self.steady_pe_cycles)
    }

    /// One multiply and one add per active PE-cycle.
    pub fn achieved_ops(&self) -> u64 {
        2 * self.active_pe_cycles
    }

    pub fn achieved_gops(&self, clock_hz: f64) -> f64 {
        if self.total_cycles == 0 {
            return 0.0;
        }
        self.achieved_ops() as f64 / (self.total_cycles as f64 / clock_hz) / 1e9
    }

    /// The same work repeated `n` times, e.g. once per time step.
    pub fn repeated(&self, n: u64) -> CycleReport {
        CycleReport {
            total_cycles: self.total_cycles * n,
            warmup_cycles: self.warmup_cycles * n,
            steady_cycles: self.steady_cycles * n,
            passes: self.passes * n,
            accumulator_latency_cycles: self.accumulator_latency_cycles * n,
            active_pe_cycles: self.active_pe_cycles * n,
            total_pe_cycles: self.total_pe_cycles * n,
            steady_pe_cycles: self.steady_pe_cycles * n,
        }
    }
}

impl std::ops::AddAssign for CycleReport {
    fn add_assign(&mut self, o: CycleReport) {
        self.total_cycles += o.total_cycles;
        self.warmup_cycles += o.warmup_cycles;
        self.steady_cycles += o.steady_cycles;
        self.passes += o.passes;
        self.accumulator_latency_cycles += o.accumulator_latency_cycles;
        self.active_pe_cycles += o.active_pe_cycles;
        self.total_pe_cycles += o.total_pe_cycles;
        self.steady_pe_cycles += o.steady_pe_cycles;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryStats {
    pub deposits: u64,
    pub peak_entries: usize,
    pub peak_bytes: u64,
}

/// Bottom partial rows of a tile, waiting for the tile below.
/// Entries are keyed by (output channel, column, consuming tile).
#[derive(Debug, Clone, Default)]
pub struct TileBoundary {
    entries: HashMap<(usize, usize, usize), Vec<i32>>,
    bytes_per_entry: u64,
    stats: BoundaryStats,
}

impl TileBoundary {
    pub fn new(bytes_per_entry: u64) -> Self {
        Self { bytes_per_entry, ..Default::default() }
    }

    pub fn deposit(&mut self, channel: usize, column: usize, tile: usize, rows: Vec<i32>) -> Result<(), ArchError> {
        if self.entries.insert((channel, column, tile), rows).is_some() {
            return Err(ArchError::Boundary { channel, column, tile, problem: "deposited twice" });
        }
        self.stats.deposits += 1;
        self.stats.peak_entries = self.stats.peak_entries.max(self.entries.len());
        self.stats.peak_bytes = self.stats.peak_entries as u64 * self.bytes_per_entry;
        Ok(())
    }

    pub fn take(&mut self, channel: usize, column: usize, tile: usize) -> Result<Vec<i32>, ArchError> {
        self.entries
            .remove(&(channel, column, tile))
            .ok_or(ArchError::Boundary { channel, column, tile, problem: "missing" })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> BoundaryStats {
        self.stats
    }
}

/// Result of scheduling one layer over one input map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvPass {
    pub output: IntMap,
    pub report: CycleReport,
    pub boundary: BoundaryStats,
}

/// One PE-block input: an input channel or one bitplane of it, stored column-major.
struct Lane {
    cols: Vec<bool>,
    weight_channel: usize,
    mode: AccumMode,
}

/// `height` counts real input rows only: vertical zero padding is never
/// streamed, it only shifts which registers hold valid outputs. `width`
/// includes the zero columns on both sides.
struct Geometry {
    height: usize,
    width: usize,
    pad: usize,
    kh: usize,
    kw: usize,
    out_channels: usize,
    lanes_per_group: usize,
}

fn check_kernel(kh: usize, kw: usize, cfg: &HardwareConfig) -> Result<(), ArchError> {
    cfg.validate()?;
    if kh > cfg.array_cols || kh > cfg.array_rows || kw > cfg.arrays_per_block {
        return Err(ArchError::KernelTooLarge {
            kh,
            kw,
            rows: cfg.array_rows,
            cols: cfg.array_cols,
            arrays: cfg.arrays_per_block,
        });
    }
    Ok(())
}

fn check_fit(input: Shape3, pad: usize, weights: &BinaryWeightTensor) -> Result<(), ArchError> {
    let (_, cin, kh, kw) = weights.dims();
    if cin != input.channels {
        return Err(ArchError::Shape(format!("weights expect {cin} input channels, input is {input}")));
    }
    if kh > input.height + 2 * pad || kw > input.width + 2 * pad {
        return Err(ArchError::Shape(format!("{kh}x{kw} kernel larger than input {input} padded by {pad}")));
    }
    Ok(())
}

fn tiles(height: usize, rows: usize) -> usize {
    height.div_ceil(rows)
}

fn estimate(lanes: usize, g: &Geometry, cfg: &HardwareConfig) -> CycleReport {
    let r = cfg.array_rows;
    let n_tiles = tiles(g.height, r);
    let groups = lanes.div_ceil(g.lanes_per_group);
    let out_w = (g.width - g.kw + 1) as u64;
    let passes = (g.out_channels * groups * n_tiles) as u64;
    let total_cycles = passes * g.width as u64;
    let steady_cycles = passes * out_w;
    let pe = cfg.pe_count() as u64;
    // Every steady cycle, each lane of the group drives kw arrays whose active
    // rows are the tile's valid input rows, times kh weight taps.
    let active_rows: u64 = (0..n_tiles).map(|t| r.min(g.height - t * r) as u64).sum();
    let active = g.out_channels as u64 * lanes as u64 * active_rows * (g.kw * g.kh) as u64 * out_w;
    CycleReport {
        total_cycles,
        warmup_cycles: total_cycles - steady_cycles,
        steady_cycles,
        passes,
        accumulator_latency_cycles: passes * cfg.accumulator_stages,
        active_pe_cycles: active,
        total_pe_cycles: total_cycles * pe,
        steady_pe_cycles: steady_cycles * pe,
    }
}

fn run(lanes: &[Lane], weights: &BinaryWeightTensor, g: &Geometry, cfg: &HardwareConfig) -> Result<ConvPass, ArchError> {
    let (r, k) = (cfg.array_rows, cfg.array_cols);
    let (h, w, kh, kw) = (g.height, g.width, g.kh, g.kw);
    let (out_h, out_w) = (h + 2 * g.pad - kh + 1, w - kw + 1);
    let regs = r + k - 1;
    let n_tiles = tiles(h, r);
    let groups: Vec<&[Lane]> = lanes.chunks(g.lanes_per_group).collect();
    let mut out = IntMap::zeros(Shape3::new(g.out_channels, out_h, out_w));
    let mut boundary = TileBoundary::new((kh - 1) as u64 * cfg.format().byte_width() as u64);
    let mut report = CycleReport::default();
    let mut arrays = vec![vec![PeArray::new(r, k); kw]; g.lanes_per_group];
    let mut block_out = vec![vec![0; regs]; g.lanes_per_group];
    let pe = cfg.pe_count() as u64;

    for oc in 0..g.out_channels {
        // wcols[lane weight channel][a] = filter column a, top to bottom.
        let wcols: Vec<Vec<Vec<bool>>> = (0..weights.in_channels())
            .map(|i| (0..kw).map(|a| (0..kh).map(|y| weights.sign_bit(oc, i, y, a)).collect()).collect())
            .collect();
        let mut states: Vec<GroupState> = (0..n_tiles * out_w).map(|_| GroupState::new(regs, groups.len())).collect();
        for (gi, group) in groups.iter().enumerate() {
            let last_group = gi + 1 == groups.len();
            let blocks = &mut block_out[..group.len()];
            for t in 0..n_tiles {
                let row0 = t * r;
                let rows = r.min(h - row0);
                report.passes += 1;
                report.total_cycles += w as u64;
                report.warmup_cycles += (kw - 1) as u64;
                report.accumulator_latency_cycles += cfg.accumulator_stages;
                // Cycles before kw-1 only fill the shift chain; from then on
                // array a sees input column o + a and the block completes column o.
                for o in 0..out_w {
                    report.steady_cycles += 1;
                    for (bi, lane) in group.iter().enumerate() {
                        let block = &mut arrays[bi];
                        for (a, array) in block.iter_mut().enumerate() {
                            let col = &lane.cols[(o + a) * h + row0..(o + a) * h + row0 + rows];
                            report.active_pe_cycles += array.cycle(col, &wcols[lane.weight_channel][a]) as u64;
                        }
                        let views: Vec<&[i32]> = block.iter().map(|a| a.registers()).collect();
                        blocks[bi] = accumulate_stage1(&views, lane.mode)?;
                        block.iter_mut().for_each(PeArray::clear);
                    }
                    let done = accumulate_tree(blocks, cfg.pe_blocks, &mut states[t * out_w + o], last_group)?;
                    if let Some(v) = done {
                        stitch(&mut out, &mut boundary, oc, o, t, n_tiles, v, g.kh, g.pad, r)?;
                    }
                }
            }
        }
        if !boundary.is_empty() {
            return Err(ArchError::BoundaryNotEmpty(boundary.len()));
        }
    }
    report.total_pe_cycles = report.total_cycles * pe;
    report.steady_pe_cycles = report.steady_cycles * pe;
    Ok(ConvPass { output: out, report, boundary: boundary.stats() })
}

/// Places a completed column vector of tile `t`. Register `j` holds the
/// output whose window starts at real input row `t*R + j - (kh-1)`, which
/// is output row `t*R + j - (kh-1) + pad`. Windows reaching above the first
/// or below the last real row are exactly the zero-padded outputs.
#[allow(clippy::too_many_arguments)]
fn stitch(
    out: &mut IntMap,
    boundary: &mut TileBoundary,
    oc: usize,
    col: usize,
    t: usize,
    n_tiles: usize,
    mut v: Vec<i32>,
    kh: usize,
    pad: usize,
    r: usize,
) -> Result<(), ArchError> {
    let kh1 = kh - 1;
    if t > 0 {
        for (a, b) in v.iter_mut().zip(boundary.take(oc, col, t)?) {
            *a += b;
        }
    }
    let last = t + 1 == n_tiles;
    if !last {
        boundary.deposit(oc, col, t + 1, v[r..r + kh1].to_vec())?;
    }
    let out_h = out.shape().height;
    let n = if last { v.len() } else { r };
    for (j, &val) in v.iter().enumerate().take(n) {
        let Some(y) = (t * r + j + pad).checked_sub(kh1) else { continue };
        if y < out_h {
            out.set(oc, y, col, val);
        }
    }
    Ok(())
}

/// Column-major stream of one channel with `pad` zero columns on each side.
fn stream<T>(s: Shape3, pad: usize, get: impl Fn(usize, usize) -> T, zero: T) -> Vec<T>
where
    T: Copy,
{
    let mut cols = Vec::with_capacity((s.width + 2 * pad) * s.height);
    for x in 0..s.width + 2 * pad {
        for y in 0..s.height {
            cols.push(if x < pad || x >= s.width + pad { zero } else { get(y, x - pad) });
        }
    }
    cols
}

/// Schedules a spiking conv (or fc as 1x1) layer over one spike map with
/// `pad` pixels of zero padding on every side.
pub fn schedule_conv_layer(
    weights: &BinaryWeightTensor,
    input: &SpikeMap,
    pad: usize,
    cfg: &HardwareConfig,
) -> Result<ConvPass, ArchError> {
    let s = input.shape();
    let (cout, _, kh, kw) = weights.dims();
    check_kernel(kh, kw, cfg)?;
    check_fit(s, pad, weights)?;
    let lanes: Vec<Lane> = (0..s.channels)
        .map(|c| Lane { cols: stream(s, pad, |y, x| input.get(c, y, x), false), weight_channel: c, mode: AccumMode::Spiking })
        .collect();
    let g = Geometry {
        height: s.height,
        width: s.width + 2 * pad,
        pad,
        kh,
        kw,
        out_channels: cout,
        lanes_per_group: cfg.group_size,
    };
    run(&lanes, weights, &g, cfg)
}

fn encoding_group(cfg: &HardwareConfig) -> Result<usize, ArchError> {
    match cfg.encoding_channels_per_pass() {
        0 => Err(ArchError::Config("the encoding layer needs at least 8 PE blocks".into())),
        n => Ok(n * 8),
    }
}

/// Schedules the encoding layer over an 8-bit image with `pad` pixels of
/// zero padding on every side.
/// Each input channel is split into eight bitplanes on eight PE blocks that
/// share its weights; stage 1 shifts each plane by its significance.
pub fn schedule_encoding_layer(
    weights: &BinaryWeightTensor,
    input: &ImageTensor,
    pad: usize,
    cfg: &HardwareConfig,
) -> Result<ConvPass, ArchError> {
    let s = input.shape();
    let (cout, _, kh, kw) = weights.dims();
    check_kernel(kh, kw, cfg)?;
    check_fit(s, pad, weights)?;
    let lanes_per_group = encoding_group(cfg)?;
    let mut lanes = Vec::with_capacity(s.channels * 8);
    for c in 0..s.channels {
        for b in 0..8u32 {
            let cols = stream(s, pad, |y, x| (input.get(c, y, x) >> b) & 1 == 1, false);
            lanes.push(Lane { cols, weight_channel: c, mode: AccumMode::Encoding { bitplane: b } });
        }
    }
    let g = Geometry { height: s.height, width: s.width + 2 * pad, pad, kh, kw, out_channels: cout, lanes_per_group };
    run(&lanes, weights, &g, cfg)
}

/// Closed-form cycle counts of [`schedule_conv_layer`].
pub fn estimate_conv_cycles(
    input: Shape3,
    pad: usize,
    kernel: (usize, usize),
    out_channels: usize,
    cfg: &HardwareConfig,
) -> CycleReport {
    let g = Geometry {
        height: input.height,
        width: input.width + 2 * pad,
        pad,
        kh: kernel.0,
        kw: kernel.1,
        out_channels,
        lanes_per_group: cfg.group_size,
    };
    estimate(input.channels, &g, cfg)
}

/// Closed-form cycle counts of [`schedule_encoding_layer`].
pub fn estimate_encoding_cycles(
    input: Shape3,
    pad: usize,
    kernel: (usize, usize),
    out_channels: usize,
    cfg: &HardwareConfig,
) -> Result<CycleReport, ArchError> {
    let g = Geometry {
        height: input.height,
        width: input.width + 2 * pad,
        pad,
        kh: kernel.0,
        kw: kernel.1,
        out_channels,
        lanes_per_group: encoding_group(cfg)?,
    };
    Ok(estimate(input.channels * 8, &g, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{conv2d_oracle, Padding};
    use proptest::prelude::*;

    fn small_cfg(rows: usize) -> HardwareConfig {
        HardwareConfig { array_rows: rows, ..Default::default() }
    }

    #[test]
    fn five_by_five_example() {
        // 5x5 input, one 3x3 filter, 5x3 arrays: a single tile whose three
        // output columns complete in three steady cycles after two warmup cycles.
        let cfg = small_cfg(5);
        let input = SpikeMap::from_bits(Shape3::new(1, 5, 5), vec![true; 25]).unwrap();
        let w = BinaryWeightTensor::from_weights(1, 1, 3, 3, &[1; 9]).unwrap();
        let pass = schedule_conv_layer(&w, &input, 0, &cfg).unwrap();
        assert_eq!(pass.report.steady_cycles, 3);
        assert_eq!(pass.report.warmup_cycles, 2);
        assert_eq!(pass.report.total_cycles, 5);
        assert_eq!(pass.output.data(), &[9; 9]);
    }

    #[test]
    fn one_by_one() {
        let cfg = HardwareConfig::default();
        for (s, wt, want) in [(true, 1, 1), (true, -1, -1), (false, -1, 0)] {
            let input = SpikeMap::from_bits(Shape3::new(1, 1, 1), vec![s]).unwrap();
            let w = BinaryWeightTensor::from_weights(1, 1, 1, 1, &[wt]).unwrap();
            let pass = schedule_conv_layer(&w, &input, 0, &cfg).unwrap();
            assert_eq!(pass.report.total_cycles, 1);
            assert_eq!(pass.output.data(), &[want]);
        }
    }

    #[test]
    fn two_tiles_match_oracle() {
        let cfg = HardwareConfig::default();
        let bits: Vec<bool> = (0..2 * 16 * 9).map(|i| (i * 7 + i / 5) % 3 != 0).collect();
        let input = SpikeMap::from_bits(Shape3::new(2, 16, 9), bits).unwrap();
        let signs: Vec<bool> = (0..3 * 2 * 9).map(|i| i % 4 == 1).collect();
        let w = BinaryWeightTensor::from_sign_bits(3, 2, 3, 3, &signs).unwrap();
        let pass = schedule_conv_layer(&w, &input, 0, &cfg).unwrap();
        assert_eq!(pass.output, conv2d_oracle(&input.to_int_map(), &w, Padding::Valid).unwrap());
        assert_eq!(pass.boundary.deposits, 3 * 7);
    }

    #[test]
    fn encoding_single_pixel() {
        let cfg = HardwareConfig::default();
        let img = ImageTensor::from_vec(Shape3::new(1, 1, 1), vec![5]).unwrap();
        let w = BinaryWeightTensor::from_weights(1, 1, 1, 1, &[1]).unwrap();
        assert_eq!(schedule_encoding_layer(&w, &img, 0, &cfg).unwrap().output.data(), &[5]);
        let zero = ImageTensor::zeros(Shape3::new(3, 4, 4));
        let w = BinaryWeightTensor::from_weights(2, 3, 3, 3, &[-1; 54]).unwrap();
        assert!(schedule_encoding_layer(&w, &zero, 0, &cfg).unwrap().output.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn rejects_large_kernels() {
        let cfg = HardwareConfig::default();
        let input = SpikeMap::zeros(Shape3::new(1, 8, 8));
        let w = BinaryWeightTensor::from_weights(1, 1, 5, 5, &[1; 25]).unwrap();
        assert!(matches!(schedule_conv_layer(&w, &input, 0, &cfg), Err(ArchError::KernelTooLarge { .. })));
    }

    #[test]
    fn full_tiles_reach_full_steady_utilization() {
        let cfg = HardwareConfig::default();
        let est = estimate_conv_cycles(Shape3::new(64, 16, 16), 0, (3, 3), 2, &cfg);
        assert_eq!(est.steady_utilization(), 1.0);
        assert!((est.utilization() - 14.0 / 16.0).abs() < 1e-12);
        assert_eq!(est.achieved_ops(), 2 * est.active_pe_cycles);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn simulation_matches_estimate_and_oracle(
            cin in 1usize..40, cout in 1usize..4, h in 3usize..20, w in 3usize..12,
            k in 1usize..4, pad in 0usize..3, seed in any::<u64>(),
        ) {
            let cfg = HardwareConfig::default();
            let mut x = seed | 1;
            let mut next = move || { x ^= x << 13; x ^= x >> 7; x ^= x << 17; x };
            let shape = Shape3::new(cin, h, w);
            let input = SpikeMap::from_bits(shape, (0..shape.len()).map(|_| next() % 2 == 0).collect()).unwrap();
            let signs: Vec<bool> = (0..cout * cin * k * k).map(|_| next() % 2 == 0).collect();
            let wt = BinaryWeightTensor::from_sign_bits(cout, cin, k, k, &signs).unwrap();
            let pass = schedule_conv_layer(&wt, &input, pad, &cfg).unwrap();
            let padded = input.zero_padded(pad).to_int_map();
            prop_assert_eq!(&pass.output, &conv2d_oracle(&padded, &wt, Padding::Valid).unwrap());
            prop_assert_eq!(pass.report, estimate_conv_cycles(shape, pad, (k, k), cout, &cfg));
            prop_assert!(pass.report.utilization() <= 1.0);
        }
    }
}
