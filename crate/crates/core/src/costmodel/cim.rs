use serde::{Deserialize, Serialize};

use super::profile::{CimConfig, ACCUMULATIONS_PER_ACCESS, PRODUCTS_PER_ACCESS};
use super::CostError;
use crate::cimsim::dedup_traffic_factor;
use crate::netir::{count_macs, count_params, LayerKind, LayerSpec};

/// Macro accesses needed for a layer (or the CIM slice of one).
///
/// One access multiplies 9 inputs by 9 weights for each of 16 output channels.
/// Convolution taps fill the 9 products (a 3x3 window is one full row);
/// pointwise, FC and token-wise linears pack 9 input features per row. The 16
/// accumulations map to output channels, so a partial group of channels still
/// costs a whole access.
pub fn cim_accesses(slice: &LayerSpec) -> Result<u64, CostError> {
    let (ho, wo) = slice.out_spatial();
    let pixels = ho as u64 * wo as u64;
    let groups = (slice.out_ch as u64).div_ceil(ACCUMULATIONS_PER_ACCESS);
    let taps = slice.kernel.0 as u64 * slice.kernel.1 as u64;
    let rows = |features: u64| features.div_ceil(PRODUCTS_PER_ACCESS);
    let n = match slice.kind {
        LayerKind::DepthwiseConv2d => pixels * groups * rows(taps),
        LayerKind::Conv2d => pixels * groups * slice.in_ch as u64 * rows(taps),
        LayerKind::PointwiseConv2d => pixels * groups * rows(slice.in_ch as u64),
        LayerKind::FullyConnected => groups * rows(slice.in_ch as u64),
        LayerKind::AttentionQKVGen | LayerKind::MLPLinear => {
            slice.tokens() * groups * rows(slice.in_ch as u64)
        }
        kind => {
            return Err(CostError::UnsupportedKind {
                kind,
                device: "cim".into(),
            })
        }
    };
    Ok(n)
}

/// Fraction of the 144 MAC slots doing useful work, `MACs / (144 * accesses)`.
pub fn utilization(slice: &LayerSpec) -> Result<f64, CostError> {
    let a = cim_accesses(slice)?;
    if a == 0 {
        return Ok(0.0);
    }
    Ok(count_macs(slice) as f64 / ((PRODUCTS_PER_ACCESS * ACCUMULATIONS_PER_ACCESS) * a) as f64)
}

fn admit(slice: &LayerSpec, cim: &CimConfig) -> Result<u64, CostError> {
    if !cim.supports(slice.kind) {
        return Err(CostError::UnsupportedKind {
            kind: slice.kind,
            device: "cim".into(),
        });
    }
    let needed = count_params(slice) * 8;
    if needed > cim.total_capacity_bits() {
        return Err(CostError::CapacityExceeded {
            needed_bits: needed,
            available_bits: cim.total_capacity_bits(),
        });
    }
    cim_accesses(slice)
}

/// Accesses are spread over every compute unit of every macro.
pub fn cim_latency(slice: &LayerSpec, cim: &CimConfig) -> Result<f64, CostError> {
    let accesses = admit(slice, cim)?;
    let lanes = cim.n_macros as f64 * cim.cus_per_macro as f64;
    Ok(accesses as f64 * cim.access_latency_cycles / lanes / cim.clock_hz)
}

/// Energy in nJ. Independent of the macro count; with several CUs per macro
/// the input-transfer share shrinks by the depthwise deduplication factor.
pub fn cim_energy(slice: &LayerSpec, cim: &CimConfig) -> Result<f64, CostError> {
    let accesses = admit(slice, cim)?;
    let s = cim.energy_split;
    let dedup = dedup_traffic_factor(slice, cim.cus_per_macro);
    let per_access = cim.access_energy_nj * (s.input_transfer * dedup + s.compute + s.weight_read);
    Ok(accesses as f64 * per_access)
}

/// Capacity check for a set of CIM-resident weight slices (8-bit weights).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub fits: bool,
    pub used_bits: u64,
    pub capacity_bits: u64,
    /// Bits held by each macro when slices are packed in order, spilling into
    /// the next macro once one is full.
    pub per_macro_bits: Vec<u64>,
    pub overflow_bits: u64,
}

pub fn weights_fit<'a, I>(assigned: I, cim: &CimConfig) -> Occupancy
where
    I: IntoIterator<Item = &'a LayerSpec>,
{
    let used_bits: u64 = assigned.into_iter().map(|l| count_params(l) * 8).sum();
    let capacity_bits = cim.total_capacity_bits();
    let mut left = used_bits;
    let per_macro_bits = (0..cim.n_macros)
        .map(|_| {
            let take = left.min(cim.capacity_bits);
            left -= take;
            take
        })
        .collect();
    Occupancy {
        fits: used_bits <= capacity_bits,
        used_bits,
        capacity_bits,
        per_macro_bits,
        overflow_bits: left,
    }
}
