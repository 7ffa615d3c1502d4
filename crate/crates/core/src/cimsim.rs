//! Input-read counting for a CIM macro with several compute units (CUs).
//!
//! When the CUs of one macro compute neighbouring outputs of a convolution in
//! the same step, their receptive fields overlap and the input-feature-map
//! controller only needs to fetch each distinct input coordinate once. This
//! module counts reads exactly for a valid (unpadded) convolution geometry and
//! carries the multi-CU area model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::netir::{LayerKind, LayerSpec};

/// How simultaneously computed outputs are grouped on the output grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// `cu_count` adjacent outputs along one output row. Groups do not wrap
    /// across rows; the last group of a row may be partial.
    Row,
    /// `rows x cols` output tiles with `rows * cols == cu_count`.
    Tile { rows: u32, cols: u32 },
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layout::Row => f.write_str("row"),
            Layout::Tile { rows, cols } => write!(f, "tile:{rows}x{cols}"),
        }
    }
}

impl FromStr for Layout {
    type Err = String;

    /// `row` or `tile:RxC`.
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("row") {
            return Ok(Layout::Row);
        }
        let dims = s
            .strip_prefix("tile:")
            .ok_or_else(|| format!("unknown layout `{s}` (expected `row` or `tile:RxC`)"))?;
        let (r, c) = dims
            .split_once('x')
            .ok_or_else(|| format!("bad tile shape `{dims}`"))?;
        let rows = r.parse().map_err(|_| format!("bad tile rows `{r}`"))?;
        let cols = c.parse().map_err(|_| format!("bad tile cols `{c}`"))?;
        Ok(Layout::Tile { rows, cols })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub kernel: (u32, u32),
    pub stride: u32,
    pub input: (u32, u32),
    pub cu_count: u32,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CimSimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("input {input:?} is smaller than kernel {kernel:?}")]
    EmptyOutput {
        input: (u32, u32),
        kernel: (u32, u32),
    },
}

impl DedupConfig {
    pub fn row(kernel: u32, stride: u32, input: (u32, u32), cu_count: u32) -> Self {
        DedupConfig {
            kernel: (kernel, kernel),
            stride,
            input,
            cu_count,
            layout: Layout::Row,
        }
    }

    /// Smallest input holding exactly one full group of outputs.
    pub fn one_group_input(
        kernel: (u32, u32),
        stride: u32,
        layout: Layout,
        cu_count: u32,
    ) -> (u32, u32) {
        let (gr, gc) = match layout {
            Layout::Row => (1, cu_count),
            Layout::Tile { rows, cols } => (rows, cols),
        };
        (
            (gr.max(1) - 1) * stride + kernel.0,
            (gc.max(1) - 1) * stride + kernel.1,
        )
    }

    pub fn validate(&self) -> Result<(), CimSimError> {
        let bad = |m: &str| Err(CimSimError::InvalidConfig(m.to_string()));
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return bad("kernel dimensions must be at least 1");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if self.cu_count == 0 {
            return bad("cu_count must be at least 1");
        }
        if let Layout::Tile { rows, cols } = self.layout {
            if rows == 0 || cols == 0 || rows * cols != self.cu_count {
                return bad("tile rows * cols must equal cu_count");
            }
        }
        if self.input.0 < self.kernel.0 || self.input.1 < self.kernel.1 {
            return Err(CimSimError::EmptyOutput {
                input: self.input,
                kernel: self.kernel,
            });
        }
        Ok(())
    }

    pub fn output(&self) -> (u32, u32) {
        (
            (self.input.0 - self.kernel.0) / self.stride + 1,
            (self.input.1 - self.kernel.1) / self.stride + 1,
        )
    }

    /// Distinct input coordinates read by one group of outputs.
    fn group_reads(&self, rows: std::ops::Range<u32>, cols: std::ops::Range<u32>) -> u64 {
        let (kh, kw) = self.kernel;
        let mut coords = Vec::with_capacity((rows.len() * cols.len()) * (kh * kw) as usize);
        for oy in rows {
            for ox in cols.clone() {
                for ky in 0..kh {
                    for kx in 0..kw {
                        coords.push((oy * self.stride + ky, ox * self.stride + kx));
                    }
                }
            }
        }
        coords.sort_unstable();
        coords.dedup();
        coords.len() as u64
    }
}

pub fn naive_reads(cfg: &DedupConfig) -> Result<u64, CimSimError> {
    cfg.validate()?;
    let (ho, wo) = cfg.output();
    Ok(ho as u64 * wo as u64 * cfg.kernel.0 as u64 * cfg.kernel.1 as u64)
}

pub fn unique_reads(cfg: &DedupConfig) -> Result<u64, CimSimError> {
    cfg.validate()?;
    let (ho, wo) = cfg.output();
    let total = match cfg.layout {
        Layout::Row => {
            // Every output row has the same group structure, shifted by the stride.
            let n = cfg.cu_count;
            let per_row: u64 = (0..wo)
                .step_by(n as usize)
                .map(|x0| cfg.group_reads(0..1, x0..(x0 + n).min(wo)))
                .sum();
            per_row * ho as u64
        }
        Layout::Tile { rows, cols } => {
            let mut sum = 0;
            for y0 in (0..ho).step_by(rows as usize) {
                for x0 in (0..wo).step_by(cols as usize) {
                    sum += cfg.group_reads(y0..(y0 + rows).min(ho), x0..(x0 + cols).min(wo));
                }
            }
            sum
        }
    };
    Ok(total)
}

pub fn reduction_ratio(cfg: &DedupConfig) -> Result<f64, CimSimError> {
    let naive = naive_reads(cfg)?;
    let unique = unique_reads(cfg)?;
    Ok(1.0 - unique as f64 / naive as f64)
}

/// Reduction of one full row group of `n` outputs:
/// `1 - kh*((n-1)*s + kw) / (n*kh*kw)`, or 0 when windows do not overlap.
/// For a 3x3 kernel at stride 1 this is `1 - (n+2)/(3n)`, tending to 2/3.
pub fn row_closed_form(kernel: (u32, u32), stride: u32, n: u32) -> f64 {
    if stride >= kernel.1 || n <= 1 {
        return 0.0;
    }
    let (kh, kw) = (kernel.0 as f64, kernel.1 as f64);
    let n = n as f64;
    1.0 - kh * ((n - 1.0) * stride as f64 + kw) / (n * kh * kw)
}

/// Input-read multiplier (`unique / naive`) for a layer computed with
/// `cu_count` CUs per macro in row groups. Only depthwise convolutions have
/// overlapping windows inside one channel; every other kind returns 1.0.
pub fn dedup_traffic_factor(layer: &LayerSpec, cu_count: u32) -> f64 {
    if layer.kind != LayerKind::DepthwiseConv2d || cu_count <= 1 {
        return 1.0;
    }
    if layer.kernel.1 <= layer.stride {
        return 1.0;
    }
    // "same" padding: stream the padded map so the output grid matches the layer.
    let (ho, wo) = layer.out_spatial();
    let cfg = DedupConfig {
        kernel: layer.kernel,
        stride: layer.stride,
        input: (
            (ho - 1) * layer.stride + layer.kernel.0,
            (wo - 1) * layer.stride + layer.kernel.1,
        ),
        cu_count,
        layout: Layout::Row,
    };
    match (naive_reads(&cfg), unique_reads(&cfg)) {
        (Ok(n), Ok(u)) if n > 0 => u as f64 / n as f64,
        _ => 1.0,
    }
}

/// Area of a macro as more compute units are added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaModel {
    /// MRAM bit-cell area projected to 7 nm, in µm².
    pub bitcell_area_um2: f64,
    /// Added compute area per extra CU, relative to the single-CU compute area.
    pub cu_overhead: f64,
    /// Upper bound on the IFMP controller overhead, relative to the macro.
    pub ifmp_ctrl_overhead: f64,
    pub memory_mm2: f64,
    pub periph_mm2: f64,
}

impl Default for AreaModel {
    fn default() -> Self {
        AreaModel {
            bitcell_area_um2: 0.0063,
            cu_overhead: 0.14,
            ifmp_ctrl_overhead: 0.001,
            memory_mm2: 0.9,
            periph_mm2: 0.15,
        }
    }
}

/// Relative compute area with `n_cu` compute units. Overheads add, they do not
/// compound. The IFMP controller term is reported separately by
/// [`ifmp_area`] because it is only bounded, not measured.
pub fn total_area(n_cu: u32, model: &AreaModel) -> f64 {
    assert!(n_cu >= 1, "a macro has at least one compute unit");
    1.0 + model.cu_overhead * (n_cu - 1) as f64
}

/// IFMP controller area bound; zero for a single-CU macro which has no controller.
pub fn ifmp_area(n_cu: u32, model: &AreaModel) -> f64 {
    if n_cu > 1 {
        model.ifmp_ctrl_overhead
    } else {
        0.0
    }
}

/// `(memory, peripheral)` area of one macro in mm².
pub fn macro_area_report(model: &AreaModel) -> (f64, f64) {
    (model.memory_mm2, model.periph_mm2)
}
