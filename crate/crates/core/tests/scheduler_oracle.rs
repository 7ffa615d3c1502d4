use hetnas::costmodel::{weights_fit, Curve, HardwareConfig, KindCurves, SaturatingCurve};
use hetnas::netir::{LayerKind, LayerSpec, Network};
use hetnas::scheduler::{
    brute_force_schedule, cim_weight_bits, npu_only_report, schedule_network, slice_layer,
    split_layer, Objective, Schedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worst ratio of heuristic to optimal cost tolerated when capacity binds.
const TIGHT_BOUND: f64 = 1.25;
const CASES: u64 = 1_000;

fn net(layers: Vec<LayerSpec>) -> Network {
    Network {
        layers,
        ..Network::default()
    }
}

/// Up to three CIM-eligible layers whose split extent is at most 8 steps,
/// plus an optional NPU-only attention matmul.
fn toy_network(rng: &mut ChaCha8Rng) -> Network {
    let mut layers = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let hw = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let cin = rng.gen_range(1..=64);
        let ext = rng.gen_range(1..=8);
        layers.push(match rng.gen_range(0..5) {
            0 => LayerSpec::depthwise(hw, 16 * ext, 3, rng.gen_range(1..=2)),
            1 => LayerSpec::pointwise(hw, cin, ext),
            2 => LayerSpec::fully_connected(cin, ext),
            3 => LayerSpec::qkv(hw, cin, ext),
            _ => LayerSpec::mlp(hw, cin, ext),
        });
    }
    if rng.gen_bool(0.3) {
        let hw = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        layers.push(LayerSpec::attention_score(hw, rng.gen_range(1..=4)));
    }
    net(layers)
}

fn toy_hw(rng: &mut ChaCha8Rng) -> HardwareConfig {
    let mut hw = HardwareConfig::sample()
        .with_macros(rng.gen_range(1..=8))
        .with_cus(rng.gen_range(1..=4));
    if rng.gen_bool(0.3) {
        hw.interconnect.seconds_per_byte = 1e-9;
        hw.interconnect.nj_per_byte = 1e-3;
    }
    hw
}

fn resident_bits(network: &Network, s: &Schedule) -> Vec<LayerSpec> {
    s.assignments
        .iter()
        .filter(|a| a.cim_share > 0)
        .map(|a| slice_layer(&network.layers[a.layer], a.cim_share))
        .collect()
}

fn used_bits(network: &Network, s: &Schedule) -> u64 {
    s.assignments
        .iter()
        .map(|a| cim_weight_bits(&network.layers[a.layer], a.cim_share))
        .sum()
}

#[test]
fn greedy_matches_brute_force_with_slack_capacity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..CASES {
        let network = toy_network(&mut rng);
        let hw = toy_hw(&mut rng);
        for obj in [Objective::Latency, Objective::Energy] {
            let (s, r) = schedule_network(&network, &hw, obj).unwrap();
            let (_, oracle) = brute_force_schedule(&network, &hw, obj).unwrap();
            assert_eq!(r.value(obj), oracle.value(obj), "case {case} {obj}");
            assert!(r.is_consistent());
            assert!(weights_fit(&resident_bits(&network, &s), &hw.cim).fits);
        }
    }
}

#[test]
fn repaired_schedules_stay_within_bound_of_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut tight = 0;
    let mut worst: f64 = 1.0;
    for case in 0..CASES {
        let network = toy_network(&mut rng);
        let mut hw = toy_hw(&mut rng);
        let obj = if rng.gen_bool(0.5) {
            Objective::Latency
        } else {
            Objective::Energy
        };
        let (free, _) = schedule_network(&network, &hw, obj).unwrap();
        let want = used_bits(&network, &free);
        if want < 2 {
            continue;
        }
        let frac = rng.gen_range(0.1..0.9);
        let total = ((want as f64 * frac) as u64).max(1);
        hw.cim.capacity_bits = total.div_ceil(hw.cim.n_macros as u64).max(1);
        if hw.cim.total_capacity_bits() >= want {
            continue;
        }
        tight += 1;
        let (s, r) = schedule_network(&network, &hw, obj).unwrap();
        let (_, oracle) = brute_force_schedule(&network, &hw, obj).unwrap();
        assert!(
            used_bits(&network, &s) <= hw.cim.total_capacity_bits(),
            "case {case}"
        );
        assert!(r.is_consistent());
        let ratio = r.value(obj) / oracle.value(obj);
        assert!(
            ratio >= 1.0 - 1e-12,
            "case {case}: heuristic beat the oracle"
        );
        assert!(ratio <= TIGHT_BOUND, "case {case}: ratio {ratio}");
        worst = worst.max(ratio);
    }
    assert!(tight > 200, "only {tight} capacity-tight cases");
    println!("capacity-tight cases {tight}, worst ratio {worst}");
}

#[test]
fn objectives_dominate_each_other_and_beat_npu_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..CASES {
        let network = toy_network(&mut rng);
        let hw = toy_hw(&mut rng);
        let (_, lat) = schedule_network(&network, &hw, Objective::Latency).unwrap();
        let (_, en) = schedule_network(&network, &hw, Objective::Energy).unwrap();
        let npu = npu_only_report(&network, &hw).unwrap();
        assert!(lat.total_latency <= en.total_latency);
        assert!(en.total_energy <= lat.total_energy);
        assert!(lat.total_latency <= npu.total_latency);
        assert!(en.total_energy <= npu.total_energy);
    }
}

#[test]
fn more_macros_never_slow_a_schedule() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..CASES {
        let network = toy_network(&mut rng);
        let hw = toy_hw(&mut rng);
        let mut prev = f64::INFINITY;
        for n in 0..=8 {
            let (_, r) =
                schedule_network(&network, &hw.clone().with_macros(n), Objective::Latency).unwrap();
            assert!(r.total_latency <= prev);
            prev = r.total_latency;
        }
    }
}

#[test]
fn scheduling_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let network = toy_network(&mut rng);
        let hw = toy_hw(&mut rng);
        let a = schedule_network(&network, &hw, Objective::Latency).unwrap();
        let b = schedule_network(&network, &hw, Objective::Latency).unwrap();
        assert_eq!(a.0.to_json(), b.0.to_json());
        assert_eq!(a.1.to_json(), b.1.to_json());
    }
}

fn linear(peak: f64) -> Curve {
    Curve::Saturating(SaturatingCurve {
        peak,
        half_point: 0.0,
        floor: 0.0,
    })
}

/// Depthwise costs that are linear per channel on the NPU and per 16-channel
/// access group on CIM.
fn linear_hw(npu_peak: f64, npu_clock: f64, cim_clock: f64) -> HardwareConfig {
    let mut hw = HardwareConfig::sample().with_macros(1).with_cus(1);
    hw.npu.clock_hz = npu_clock;
    hw.npu.kinds.insert(
        LayerKind::DepthwiseConv2d,
        Some(KindCurves {
            throughput: linear(npu_peak),
            energy: linear(1.0),
        }),
    );
    hw.cim.clock_hz = cim_clock;
    hw.cim.access_latency_cycles = 1.0;
    hw
}

#[test]
fn symmetric_devices_split_evenly() {
    // 16 channels x 9 taps per millisecond on both devices
    let hw = linear_hw(144.0, 1000.0, 1000.0);
    let a = split_layer(
        &LayerSpec::depthwise((1, 1), 32, 3, 1),
        &hw,
        Objective::Latency,
    )
    .unwrap();
    assert_eq!((a.npu_share, a.cim_share), (16, 16));
}

#[test]
fn faster_cim_takes_the_larger_share() {
    // NPU one 16-channel unit per ms, CIM two
    let hw = linear_hw(144.0, 1000.0, 2000.0);
    let layer = LayerSpec::depthwise((1, 1), 48, 3, 1);
    let network = net(vec![layer.clone()]);
    let (s, r) = schedule_network(&network, &hw, Objective::Latency).unwrap();
    assert_eq!(
        (s.assignments[0].npu_share, s.assignments[0].cim_share),
        (16, 32)
    );
    assert_eq!(r.total_latency, 0.001);
    let (_, oracle) = brute_force_schedule(&network, &hw, Objective::Latency).unwrap();
    assert_eq!(oracle.total_latency, r.total_latency);
}

#[test]
fn fc_latency_does_not_grow_with_macros() {
    let fc = net(vec![LayerSpec::fully_connected(1024, 1000)]);
    let hw = HardwareConfig::sample();
    let (_, one) = schedule_network(&fc, &hw.clone().with_macros(1), Objective::Latency).unwrap();
    let (_, eight) = schedule_network(&fc, &hw.with_macros(8), Objective::Latency).unwrap();
    assert!(eight.total_latency <= one.total_latency);
}
