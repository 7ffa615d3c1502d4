use hetnas::costmodel::{
    cim_accesses, cim_energy, cim_latency, fit_curve, load_hw, load_profile, npu_energy,
    npu_latency, save_hw, save_profile, weights_fit, CostError, Curve, HardwareConfig,
    SAMPLE_HW_JSON,
};
use hetnas::netir::{count_macs, LayerKind, LayerSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cim_layer<R: Rng>(rng: &mut R) -> LayerSpec {
    let hw = (rng.gen_range(1..=32), rng.gen_range(1..=32));
    let cin = rng.gen_range(1..=256);
    let cout = rng.gen_range(1..=256);
    match rng.gen_range(0..5) {
        0 => LayerSpec::depthwise(
            hw,
            cin,
            *[1, 3, 5].get(rng.gen_range(0..3)).unwrap(),
            rng.gen_range(1..=2),
        ),
        1 => LayerSpec::pointwise(hw, cin, cout),
        2 => LayerSpec::fully_connected(cin, cout),
        3 => LayerSpec::qkv(hw, cin, rng.gen_range(1..=8)),
        _ => LayerSpec::mlp(hw, cin, cout),
    }
}

/// Walks the access tiling: 16 output channels per access along one axis,
/// 9 products (kernel taps, or packed input features) along the other.
fn tiled_accesses(l: &LayerSpec) -> u64 {
    let (ho, wo) = l.out_spatial();
    let taps = l.kernel.0 * l.kernel.1;
    let mut n = 0;
    let positions = match l.kind {
        LayerKind::FullyConnected => 1,
        LayerKind::AttentionQKVGen | LayerKind::MLPLinear => l.spatial.0 * l.spatial.1,
        _ => ho * wo,
    };
    for _p in 0..positions {
        for _co in (0..l.out_ch).step_by(16) {
            match l.kind {
                LayerKind::DepthwiseConv2d => n += (0..taps).step_by(9).count() as u64,
                LayerKind::Conv2d => {
                    for _ci in 0..l.in_ch {
                        n += (0..taps).step_by(9).count() as u64;
                    }
                }
                _ => n += (0..l.in_ch).step_by(9).count() as u64,
            }
        }
    }
    n
}

#[test]
fn access_count_matches_tiling_and_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let l = random_cim_layer(&mut rng);
        let a = cim_accesses(&l).unwrap();
        assert_eq!(a, tiled_accesses(&l), "{l:?}");
        assert!(144 * a >= count_macs(&l), "{l:?}");
    }
}

#[test]
fn one_access_per_sixteen_channel_depthwise_pixel() {
    assert_eq!(
        cim_accesses(&LayerSpec::depthwise((1, 1), 16, 3, 1)).unwrap(),
        1
    );
    assert_eq!(count_macs(&LayerSpec::depthwise((1, 1), 16, 3, 1)), 144);
    assert_eq!(
        cim_accesses(&LayerSpec::depthwise((8, 8), 16, 3, 1)).unwrap(),
        64
    );
}

#[test]
fn missing_kind_is_named() {
    let mut doc: serde_json::Value = serde_json::from_str(SAMPLE_HW_JSON).unwrap();
    let npu = doc["npu"].clone();
    let mut profile = serde_json::json!({ "units": doc["units"].clone(), "npu": npu });
    profile["npu"]["kinds"]
        .as_object_mut()
        .unwrap()
        .remove("DepthwiseConv2d");
    assert_eq!(
        load_profile(&profile.to_string()),
        Err(CostError::MissingKind("DepthwiseConv2d".into()))
    );
    doc["npu"]["kinds"]["FullyConnected"]["throughput"]["peak"] = serde_json::json!(0.0);
    assert!(
        matches!(load_hw(&doc.to_string()), Err(CostError::NonPositivePeak(p)) if p.contains("FullyConnected"))
    );
}

#[test]
fn save_load_round_trips() {
    let hw = HardwareConfig::sample();
    assert_eq!(load_hw(&save_hw(&hw)).unwrap(), hw);
    assert_eq!(load_profile(&save_profile(&hw.npu)).unwrap(), hw.npu);
}

#[test]
fn sample_profile_orders_pointwise_below_conv() {
    let npu = HardwareConfig::sample().npu;
    let rate = |k: LayerKind, x: f64| match &npu.curves(k).unwrap().throughput {
        Curve::Saturating(c) => c.rate(x),
        Curve::Table(t) => t.rate(x),
    };
    for x in [1e3, 1e5, 1e6, 1e8] {
        assert!(rate(LayerKind::PointwiseConv2d, x) < rate(LayerKind::Conv2d, x));
    }
}

#[test]
fn npu_curve_limits() {
    let npu = HardwareConfig::sample().npu;
    let pool = LayerSpec::global_pool((1, 1), 1);
    assert_eq!(count_macs(&pool), 0);
    let floor = npu
        .curves(LayerKind::Elementwise)
        .unwrap()
        .throughput
        .floor();
    let expected = (floor + npu.elementwise_cycles_per_element) / npu.clock_hz;
    assert_eq!(npu_latency(&pool, &npu).unwrap(), expected);

    // far past the half point the cost is linear in MACs
    let a = LayerSpec::pointwise((512, 512), 256, 256);
    let b = LayerSpec::pointwise((512, 512), 256, 512);
    let ratio = npu_latency(&b, &npu).unwrap() / npu_latency(&a, &npu).unwrap();
    assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
}

#[test]
fn half_point_gives_half_peak() {
    let c = hetnas::costmodel::SaturatingCurve {
        peak: 80.0,
        half_point: 4096.0,
        floor: 0.0,
    };
    assert_eq!(c.rate(4096.0), 40.0);
}

#[test]
fn fit_recovers_generator() {
    let samples: Vec<(f64, f64)> = [10.0, 30.0, 100.0, 300.0, 1000.0, 5000.0]
        .iter()
        .map(|&x| (x, 2.0 * x / (x + 100.0)))
        .collect();
    let fit = fit_curve(&samples).unwrap();
    assert!((fit.curve.peak - 2.0).abs() / 2.0 < 1e-6);
    assert!((fit.curve.half_point - 100.0).abs() / 100.0 < 1e-6);
    assert!(!fit.flagged);

    let same = [(5.0, 1.0), (5.0, 1.1), (5.0, 0.9)];
    assert_eq!(fit_curve(&same).unwrap_err(), CostError::DegenerateSamples);

    let falling = [(10.0, 5.0), (100.0, 3.0), (1000.0, 1.0), (10000.0, 0.2)];
    assert!(fit_curve(&falling).unwrap().flagged);
}

#[test]
fn weights_fit_capacity_boundary() {
    let cim = HardwareConfig::sample().cim;
    let mut one = cim.clone();
    one.n_macros = 1;
    // 1280 x 1024 weights = 10 Mb exactly
    let full = LayerSpec::fully_connected(1280, 1024);
    assert!(weights_fit([&full], &one).fits);
    let over = [full.clone(), LayerSpec::fully_connected(1, 1)];
    assert!(!weights_fit(over.iter(), &one).fits);
    let empty: [&LayerSpec; 0] = [];
    let occ = weights_fit(empty, &cim);
    assert!(occ.fits);
    assert_eq!(occ.used_bits, 0);
}

proptest! {
    #[test]
    fn npu_latency_increases_with_macs(h in 1u32..64, c in 1u32..128, extra in 1u32..64) {
        let npu = HardwareConfig::sample().npu;
        let small = LayerSpec::pointwise((h, h), c, c);
        let big = LayerSpec::pointwise((h, h), c, c + extra);
        prop_assert!(npu_latency(&big, &npu).unwrap() > npu_latency(&small, &npu).unwrap());
    }

    #[test]
    fn npu_rate_never_exceeds_peak(seed in any::<u64>()) {
        let npu = HardwareConfig::sample().npu;
        let l = random_cim_layer(&mut ChaCha8Rng::seed_from_u64(seed));
        let peak = npu.curves(l.kind).unwrap().throughput.peak();
        let rate = count_macs(&l) as f64 / npu_latency(&l, &npu).unwrap();
        prop_assert!(rate <= peak * npu.clock_hz);
        prop_assert!(npu_energy(&l, &npu).unwrap() > 0.0);
    }

    #[test]
    fn cim_latency_divides_over_lanes_and_energy_does_not(seed in any::<u64>(), n in 1u32..=16, cus in 1u32..=4) {
        let base = HardwareConfig::sample().cim;
        let l = random_cim_layer(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut one = base.clone();
        one.n_macros = 1;
        one.cus_per_macro = cus;
        let mut many = one.clone();
        many.n_macros = n;
        let a = cim_accesses(&l).unwrap() as f64;
        let lanes = n as f64 * cus as f64;
        prop_assert_eq!(
            cim_latency(&l, &many).unwrap(),
            a * base.access_latency_cycles / lanes / base.clock_hz
        );
        prop_assert_eq!(cim_energy(&l, &many).unwrap(), cim_energy(&l, &one).unwrap());
    }
}
