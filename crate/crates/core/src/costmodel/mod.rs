//! Analytical latency and energy models for the NPU and CIM macros.
//!
//! NPU costs follow per-kind saturating efficiency curves loaded from a
//! calibration document. CIM costs count macro accesses (9 products x 16
//! accumulations each) and divide them over macros and compute units. All
//! latencies are seconds and all energies nanojoules.

mod cim;
mod curve;
mod npu;
mod profile;

pub use cim::{cim_accesses, cim_energy, cim_latency, utilization, weights_fit, Occupancy};
pub use curve::{fit_curve, read_calibration_csv, Curve, FitReport, SaturatingCurve, TableCurve};
pub use npu::{npu_energy, npu_latency};
pub use profile::{
    load_hw, load_profile, save_hw, save_profile, CimConfig, DeviceProfile, EnergySplit,
    HardwareConfig, Interconnect, KindCurves, Units, ACCUMULATIONS_PER_ACCESS,
    DEFAULT_CAPACITY_BITS, PRODUCTS_PER_ACCESS, SAMPLE_HW_JSON,
};

use crate::netir::LayerKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("missing layer kind `{0}` in device profile")]
    MissingKind(String),
    #[error("non-positive peak at `{0}`")]
    NonPositivePeak(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unit mismatch: {0}")]
    Units(String),
    #[error("invalid hardware description: {0}")]
    Invalid(String),
    #[error("{kind} is not supported on {device}")]
    UnsupportedKind { kind: LayerKind, device: String },
    #[error("weights need {needed_bits} bits but CIM holds {available_bits}")]
    CapacityExceeded {
        needed_bits: u64,
        available_bits: u64,
    },
    #[error("all calibration workloads are identical")]
    DegenerateSamples,
    #[error("invalid calibration samples: {0}")]
    InvalidSamples(String),
}
