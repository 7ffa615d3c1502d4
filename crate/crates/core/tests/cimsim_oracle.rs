use std::collections::HashSet;

use hetnas::cimsim::{
    dedup_traffic_factor, macro_area_report, naive_reads, reduction_ratio, row_closed_form,
    total_area, unique_reads, AreaModel, DedupConfig, Layout,
};
use hetnas::netir::LayerSpec;
use proptest::prelude::*;

/// Output-coordinate groups computed together, in layout order.
fn groups(cfg: &DedupConfig) -> Vec<Vec<(u32, u32)>> {
    let ho = (cfg.input.0 - cfg.kernel.0) / cfg.stride + 1;
    let wo = (cfg.input.1 - cfg.kernel.1) / cfg.stride + 1;
    let (gr, gc) = match cfg.layout {
        Layout::Row => (1, cfg.cu_count),
        Layout::Tile { rows, cols } => (rows, cols),
    };
    let mut out = Vec::new();
    for y0 in (0..ho).step_by(gr as usize) {
        for x0 in (0..wo).step_by(gc as usize) {
            let mut g = Vec::new();
            for y in y0..(y0 + gr).min(ho) {
                for x in x0..(x0 + gc).min(wo) {
                    g.push((y, x));
                }
            }
            out.push(g);
        }
    }
    out
}

/// Distinct input coordinates per group, summed over groups.
fn oracle_reads(cfg: &DedupConfig) -> (u64, u64) {
    let mut naive = 0;
    let mut unique = 0;
    for g in groups(cfg) {
        let mut seen = HashSet::new();
        for (y, x) in g {
            for ky in 0..cfg.kernel.0 {
                for kx in 0..cfg.kernel.1 {
                    naive += 1;
                    seen.insert((y * cfg.stride + ky, x * cfg.stride + kx));
                }
            }
        }
        unique += seen.len() as u64;
    }
    (naive, unique)
}

fn row_group(n: u32) -> DedupConfig {
    let input = DedupConfig::one_group_input((3, 3), 1, Layout::Row, n);
    DedupConfig::row(3, 1, input, n)
}

#[test]
fn closed_form_matches_enumeration_for_full_row_groups() {
    for n in 1..=64 {
        let cfg = row_group(n);
        let (naive, unique) = oracle_reads(&cfg);
        assert_eq!(
            (naive_reads(&cfg).unwrap(), unique_reads(&cfg).unwrap()),
            (naive, unique)
        );
        let r = reduction_ratio(&cfg).unwrap();
        assert_eq!(r, 1.0 - (n as f64 + 2.0) / (3.0 * n as f64), "n={n}");
        assert_eq!(r, row_closed_form((3, 3), 1, n));
    }
}

#[test]
fn large_group_approaches_two_thirds() {
    let cfg = row_group(1000);
    let (naive, unique) = oracle_reads(&cfg);
    assert_eq!(unique_reads(&cfg).unwrap(), unique);
    let r = 1.0 - unique as f64 / naive as f64;
    assert!((r - 0.666).abs() <= 0.001, "{r}");
    assert!(r < 2.0 / 3.0);
}

#[test]
fn reduction_is_increasing_in_group_size() {
    let mut prev = -1.0;
    for n in 1..=128 {
        let r = reduction_ratio(&row_group(n)).unwrap();
        assert!(r > prev && r < 2.0 / 3.0);
        prev = r;
    }
}

#[test]
fn small_group_values() {
    let cfg = row_group(4);
    assert_eq!(
        (naive_reads(&cfg).unwrap(), unique_reads(&cfg).unwrap()),
        (36, 18)
    );
    assert_eq!(reduction_ratio(&cfg).unwrap(), 0.5);
    let cfg = row_group(2);
    assert_eq!(
        (naive_reads(&cfg).unwrap(), unique_reads(&cfg).unwrap()),
        (18, 12)
    );
}

#[test]
fn disjoint_windows_share_nothing() {
    let cfg = DedupConfig::row(3, 3, (3, 30), 8);
    assert_eq!(reduction_ratio(&cfg).unwrap(), 0.0);
    let cfg = DedupConfig::row(1, 2, (9, 9), 4);
    assert_eq!(unique_reads(&cfg).unwrap(), naive_reads(&cfg).unwrap());
}

#[test]
fn area_model() {
    let m = AreaModel::default();
    assert_eq!(total_area(1, &m), 1.0);
    assert_eq!(total_area(4, &m), 1.42);
    assert_eq!(macro_area_report(&m), (0.9, 0.15));
    for n in 1..32 {
        assert!(total_area(n + 1, &m) > total_area(n, &m));
        let step = total_area(n + 1, &m) - total_area(n, &m);
        assert!((step - 0.14).abs() < 1e-12);
    }
}

#[test]
fn traffic_factor() {
    let dw = LayerSpec::depthwise((56, 56), 32, 3, 1);
    let f = dedup_traffic_factor(&dw, 4);
    assert!((f - 0.5).abs() < 0.02, "{f}");
    assert_eq!(dedup_traffic_factor(&dw, 1), 1.0);
    assert_eq!(
        dedup_traffic_factor(&LayerSpec::pointwise((56, 56), 32, 64), 4),
        1.0
    );
}

fn config() -> impl Strategy<Value = DedupConfig> {
    (
        1u32..=4,
        1u32..=4,
        1u32..=3,
        1u32..=4,
        1u32..=4,
        0u32..=12,
        0u32..=12,
        any::<bool>(),
    )
        .prop_map(|(kh, kw, stride, r, c, extra_h, extra_w, tile)| {
            let layout = if tile {
                Layout::Tile { rows: r, cols: c }
            } else {
                Layout::Row
            };
            let cu_count = if tile { r * c } else { c };
            DedupConfig {
                kernel: (kh, kw),
                stride,
                input: (kh + extra_h, kw + extra_w),
                cu_count,
                layout,
            }
        })
}

proptest! {
    #[test]
    fn counts_match_enumeration(cfg in config()) {
        let (naive, unique) = oracle_reads(&cfg);
        prop_assert_eq!(naive_reads(&cfg).unwrap(), naive);
        prop_assert_eq!(unique_reads(&cfg).unwrap(), unique);
        prop_assert!(unique <= naive);
        if cfg.cu_count == 1 {
            prop_assert_eq!(unique, naive);
        }
    }
}
