use super::profile::DeviceProfile;
use super::CostError;
use crate::netir::{count_macs, count_traffic, LayerKind, LayerSpec};

fn curves_for<'a>(
    layer: &LayerSpec,
    profile: &'a DeviceProfile,
) -> Result<&'a super::profile::KindCurves, CostError> {
    profile
        .curves(layer.kind)
        .ok_or(CostError::UnsupportedKind {
            kind: layer.kind,
            device: profile.name.clone(),
        })
}

fn elementwise_elements(layer: &LayerSpec) -> f64 {
    if layer.kind == LayerKind::Elementwise {
        count_traffic(layer).input_bytes as f64
    } else {
        0.0
    }
}

/// `(floor + MACs / rate(MACs)) / clock`, plus the per-element overhead of
/// elementwise layers. Zero-MAC layers pay the floor only.
pub fn npu_latency(layer: &LayerSpec, profile: &DeviceProfile) -> Result<f64, CostError> {
    let c = curves_for(layer, profile)?;
    let cycles = c.throughput.cost(count_macs(layer) as f64)
        + elementwise_elements(layer) * profile.elementwise_cycles_per_element;
    Ok(cycles / profile.clock_hz)
}

/// Energy in nJ, from the energy-efficiency curve.
pub fn npu_energy(layer: &LayerSpec, profile: &DeviceProfile) -> Result<f64, CostError> {
    let c = curves_for(layer, profile)?;
    Ok(c.energy.cost(count_macs(layer) as f64)
        + elementwise_elements(layer) * profile.elementwise_nj_per_element)
}
