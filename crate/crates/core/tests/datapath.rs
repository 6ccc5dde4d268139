use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsa_core::arch::{
    estimate_conv_cycles, estimate_encoding_cycles, run_network_engine, schedule_conv_layer, schedule_encoding_layer,
    HardwareConfig,
};
use vsa_core::fixed::QFormat;
use vsa_core::mem::{footprints, pingpong_schedule, plan_fusion, simulate_traffic, FusionPlan};
use vsa_core::net::{generate_random_bundle, random_image, validate, Preset};
use vsa_core::snn::{conv2d_oracle, run_network_oracle, BinaryWeightTensor, ImageTensor, Padding, Shape3, SpikeMap};

fn random_spikes(rng: &mut ChaCha8Rng, shape: Shape3) -> SpikeMap {
    SpikeMap::from_bits(shape, (0..shape.len()).map(|_| rng.random_bool(0.4)).collect()).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, cout: usize, cin: usize, k: usize) -> BinaryWeightTensor {
    let signs: Vec<bool> = (0..cout * cin * k * k).map(|_| rng.random()).collect();
    BinaryWeightTensor::from_sign_bits(cout, cin, k, k, &signs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tiled_and_grouped_conv_equals_oracle(
        cin in 1usize..=80, cout in 1usize..=3, h in 3usize..=32, w in 3usize..=12, pad in 0usize..=1,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = random_spikes(&mut rng, Shape3::new(cin, h, w));
        let wt = random_weights(&mut rng, cout, cin, 3);
        let cfg = HardwareConfig::default();
        let pass = schedule_conv_layer(&wt, &input, pad, &cfg).unwrap();
        prop_assert_eq!(pass.output, conv2d_oracle(&input.to_int_map(), &wt, Padding::Zero(pad)).unwrap());
        prop_assert_eq!(pass.report, estimate_conv_cycles(input.shape(), pad, (3, 3), cout, &cfg));
    }

    #[test]
    fn bitplane_encoding_equals_oracle(h in 3usize..=20, w in 3usize..=20, pad in 0usize..=1, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape3::new(3, h, w);
        let image = ImageTensor::from_vec(shape, (0..shape.len()).map(|_| rng.random()).collect()).unwrap();
        let wt = random_weights(&mut rng, 2, 3, 3);
        let cfg = HardwareConfig::default();
        let pass = schedule_encoding_layer(&wt, &image, pad, &cfg).unwrap();
        prop_assert_eq!(pass.output, conv2d_oracle(&image.to_int_map(), &wt, Padding::Zero(pad)).unwrap());
        prop_assert_eq!(pass.report, estimate_encoding_cycles(shape, pad, (3, 3), 2, &cfg).unwrap());
    }
}

#[test]
fn small_arrays_and_groups_still_exact() {
    let cfg = HardwareConfig { pe_blocks: 8, array_rows: 4, group_size: 5, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let input = random_spikes(&mut rng, Shape3::new(13, 17, 7));
    let wt = random_weights(&mut rng, 4, 13, 3);
    let pass = schedule_conv_layer(&wt, &input, 0, &cfg).unwrap();
    assert_eq!(pass.output, conv2d_oracle(&input.to_int_map(), &wt, Padding::Valid).unwrap());
    assert_eq!(pass.report.passes, 4 * 3 * 5);
}

#[test]
fn mnist_engine_matches_oracle_and_buffers_carry_reference_spikes() {
    let cfg = HardwareConfig::default();
    let net = validate(&Preset::Mnist.network(), Preset::Mnist.input_shape()).unwrap();
    let bundle = generate_random_bundle(&net, 0, QFormat::Q24_8, 1e-5).unwrap();
    let image = random_image(net.input, 0);
    let engine = run_network_engine(&bundle, &image, 8, &cfg).unwrap();
    let oracle = run_network_oracle(&bundle, &image, 8).unwrap();
    assert_eq!(engine.layers, oracle.layers);
    assert!(engine.total().utilization() <= 1.0);

    let layers = footprints(&net, cfg.format().byte_width());
    for plan in [FusionPlan::unfused(&layers), plan_fusion(&layers, &cfg)] {
        let trace = pingpong_schedule(&layers, &plan, 8, &cfg, Some(&oracle.layers)).unwrap();
        assert!(trace.verified_maps > 0);
        let ledger = simulate_traffic(&layers, &plan, 8, &cfg).unwrap();
        assert_eq!(trace.dram_read_bytes + trace.dram_write_bytes, ledger.total_bytes);
    }
}
