use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::curve::Curve;
use super::CostError;
use crate::netir::LayerKind;

/// Unit header every hardware document must declare verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub time: String,
    pub energy: String,
    pub clock: String,
    pub throughput: String,
    pub efficiency: String,
    pub capacity: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            time: "s".into(),
            energy: "nJ".into(),
            clock: "Hz".into(),
            throughput: "MAC/cycle".into(),
            efficiency: "MAC/nJ".into(),
            capacity: "bit".into(),
        }
    }
}

impl Units {
    fn check(&self) -> Result<(), CostError> {
        let want = Units::default();
        let pairs = [
            ("time", &self.time, &want.time),
            ("energy", &self.energy, &want.energy),
            ("clock", &self.clock, &want.clock),
            ("throughput", &self.throughput, &want.throughput),
            ("efficiency", &self.efficiency, &want.efficiency),
            ("capacity", &self.capacity, &want.capacity),
        ];
        for (field, got, want) in pairs {
            if got != want {
                return Err(CostError::Units(format!(
                    "units.{field} is `{got}`, expected `{want}`"
                )));
            }
        }
        Ok(())
    }
}

/// Throughput (MAC/cycle, floor in cycles) and energy efficiency (MAC/nJ,
/// floor in nJ) of one layer kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindCurves {
    pub throughput: Curve,
    pub energy: Curve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    pub clock_hz: f64,
    /// `None` marks a kind the device explicitly cannot run.
    pub kinds: BTreeMap<LayerKind, Option<KindCurves>>,
    /// Extra cost of zero-MAC elementwise layers, per input element.
    pub elementwise_cycles_per_element: f64,
    pub elementwise_nj_per_element: f64,
}

impl DeviceProfile {
    pub fn curves(&self, kind: LayerKind) -> Option<&KindCurves> {
        self.kinds.get(&kind).and_then(Option::as_ref)
    }
}

const UNSUPPORTED: &str = "unsupported";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    name: String,
    clock_hz: f64,
    #[serde(default)]
    elementwise_cycles_per_element: f64,
    #[serde(default)]
    elementwise_nj_per_element: f64,
    kinds: BTreeMap<String, serde_json::Value>,
}

impl RawDevice {
    fn into_profile(self) -> Result<DeviceProfile, CostError> {
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(CostError::Invalid("npu.clock_hz must be positive".into()));
        }
        for (field, v) in [
            (
                "elementwise_cycles_per_element",
                self.elementwise_cycles_per_element,
            ),
            (
                "elementwise_nj_per_element",
                self.elementwise_nj_per_element,
            ),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CostError::Invalid(format!("npu.{field} must be >= 0")));
            }
        }
        if let Some(unknown) = self.kinds.keys().find(|k| k.parse::<LayerKind>().is_err()) {
            return Err(CostError::Parse(format!(
                "npu.kinds.{unknown}: unknown layer kind"
            )));
        }
        let mut kinds = BTreeMap::new();
        for kind in LayerKind::ALL {
            let value = self
                .kinds
                .get(kind.name())
                .ok_or_else(|| CostError::MissingKind(kind.name().to_string()))?;
            let entry = if value.as_str() == Some(UNSUPPORTED) {
                None
            } else {
                let path = format!("npu.kinds.{kind}");
                let curves: KindCurves = serde_json::from_value(value.clone())
                    .map_err(|e| CostError::Parse(format!("{path}: {e}")))?;
                curves.throughput.check(&format!("{path}.throughput"))?;
                curves.energy.check(&format!("{path}.energy"))?;
                Some(curves)
            };
            kinds.insert(kind, entry);
        }
        Ok(DeviceProfile {
            name: self.name,
            clock_hz: self.clock_hz,
            kinds,
            elementwise_cycles_per_element: self.elementwise_cycles_per_element,
            elementwise_nj_per_element: self.elementwise_nj_per_element,
        })
    }

    fn from_profile(p: &DeviceProfile) -> Self {
        RawDevice {
            name: p.name.clone(),
            clock_hz: p.clock_hz,
            elementwise_cycles_per_element: p.elementwise_cycles_per_element,
            elementwise_nj_per_element: p.elementwise_nj_per_element,
            kinds: p
                .kinds
                .iter()
                .map(|(k, v)| {
                    let value = match v {
                        Some(c) => serde_json::to_value(c).expect("curves serialize"),
                        None => serde_json::Value::String(UNSUPPORTED.into()),
                    };
                    (k.name().to_string(), value)
                })
                .collect(),
        }
    }
}

/// Share of one CIM access's energy spent on each activity. Input
/// deduplication only scales `input_transfer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySplit {
    pub input_transfer: f64,
    pub compute: f64,
    pub weight_read: f64,
}

/// Products per access (one 3x3 kernel window).
pub const PRODUCTS_PER_ACCESS: u64 = 9;
/// Accumulations per access (16 output channels).
pub const ACCUMULATIONS_PER_ACCESS: u64 = 16;
/// 10 Mb of MRAM per macro.
pub const DEFAULT_CAPACITY_BITS: u64 = 10 * (1 << 20);

fn default_cus() -> u32 {
    1
}

fn default_capacity() -> u64 {
    DEFAULT_CAPACITY_BITS
}

fn default_supported() -> BTreeSet<LayerKind> {
    [
        LayerKind::DepthwiseConv2d,
        LayerKind::PointwiseConv2d,
        LayerKind::FullyConnected,
    ]
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CimConfig {
    /// 0 means an NPU-only system.
    pub n_macros: u32,
    #[serde(default = "default_cus")]
    pub cus_per_macro: u32,
    #[serde(default = "default_capacity")]
    pub capacity_bits: u64,
    pub clock_hz: f64,
    pub access_latency_cycles: f64,
    pub access_energy_nj: f64,
    pub energy_split: EnergySplit,
    #[serde(default = "default_supported")]
    pub supported: BTreeSet<LayerKind>,
}

impl CimConfig {
    pub const fn macs_per_access(&self) -> u64 {
        PRODUCTS_PER_ACCESS * ACCUMULATIONS_PER_ACCESS
    }

    pub fn total_capacity_bits(&self) -> u64 {
        self.n_macros as u64 * self.capacity_bits
    }

    pub fn supports(&self, kind: LayerKind) -> bool {
        self.n_macros > 0 && self.supported.contains(&kind)
    }

    pub(crate) fn check(&self) -> Result<(), CostError> {
        let bad = |m: &str| Err(CostError::Invalid(format!("cim.{m}")));
        if self.cus_per_macro == 0 {
            return bad("cus_per_macro must be >= 1");
        }
        if self.capacity_bits == 0 {
            return bad("capacity_bits must be positive");
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return bad("clock_hz must be positive");
        }
        if !(self.access_latency_cycles.is_finite() && self.access_latency_cycles > 0.0) {
            return bad("access_latency_cycles must be positive");
        }
        if !(self.access_energy_nj.is_finite() && self.access_energy_nj >= 0.0) {
            return bad("access_energy_nj must be >= 0");
        }
        let s = self.energy_split;
        let parts = [s.input_transfer, s.compute, s.weight_read];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("energy_split fractions must be nonnegative and sum to 1");
        }
        if let Some(k) = self.supported.iter().find(|k| !k.has_static_weights()) {
            return Err(CostError::Invalid(format!(
                "cim.supported: {k} has no static weights to keep in memory"
            )));
        }
        Ok(())
    }
}

/// Optional per-byte tax on data exchanged between the devices when a layer
/// is split across both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interconnect {
    pub seconds_per_byte: f64,
    pub nj_per_byte: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardwareConfig {
    pub npu: DeviceProfile,
    pub cim: CimConfig,
    pub interconnect: Interconnect,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    units: Units,
    npu: RawDevice,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HardwareDoc {
    units: Units,
    npu: RawDevice,
    cim: CimConfig,
    #[serde(default)]
    interconnect: Interconnect,
}

fn parse<T: serde::de::DeserializeOwned>(document: &str) -> Result<T, CostError> {
    serde_json::from_str(document).map_err(|e| CostError::Parse(e.to_string()))
}

/// Parses a `{units, npu}` document.
pub fn load_profile(document: &str) -> Result<DeviceProfile, CostError> {
    let doc: ProfileDoc = parse(document)?;
    doc.units.check()?;
    doc.npu.into_profile()
}

pub fn save_profile(profile: &DeviceProfile) -> String {
    let doc = ProfileDoc {
        units: Units::default(),
        npu: RawDevice::from_profile(profile),
    };
    serde_json::to_string_pretty(&doc).expect("profile serializes")
}

/// Parses a full `{units, npu, cim, interconnect}` hardware document.
pub fn load_hw(document: &str) -> Result<HardwareConfig, CostError> {
    let doc: HardwareDoc = parse(document)?;
    doc.units.check()?;
    let npu = doc.npu.into_profile()?;
    doc.cim.check()?;
    let ic = doc.interconnect;
    if !(ic.seconds_per_byte >= 0.0 && ic.nj_per_byte >= 0.0)
        || !ic.seconds_per_byte.is_finite()
        || !ic.nj_per_byte.is_finite()
    {
        return Err(CostError::Invalid("interconnect taxes must be >= 0".into()));
    }
    Ok(HardwareConfig {
        npu,
        cim: doc.cim,
        interconnect: ic,
    })
}

pub fn save_hw(hw: &HardwareConfig) -> String {
    let doc = HardwareDoc {
        units: Units::default(),
        npu: RawDevice::from_profile(&hw.npu),
        cim: hw.cim.clone(),
        interconnect: hw.interconnect,
    };
    serde_json::to_string_pretty(&doc).expect("hardware serializes")
}

/// Illustrative profile shipped with the crate. Its numbers are authored to
/// reproduce the qualitative ordering of a small edge NPU (regular conv most
/// efficient, depthwise and FC least) against 8 MRAM CIM macros, not measured
/// values.
pub const SAMPLE_HW_JSON: &str = include_str!("../../data/sample_hw.json");

impl HardwareConfig {
    pub fn sample() -> Self {
        load_hw(SAMPLE_HW_JSON).expect("bundled sample profile is valid")
    }

    pub fn with_macros(mut self, n_macros: u32) -> Self {
        self.cim.n_macros = n_macros;
        self
    }

    pub fn with_cus(mut self, cus_per_macro: u32) -> Self {
        self.cim.cus_per_macro = cus_per_macro;
        self
    }

    pub fn to_json(&self) -> String {
        save_hw(self)
    }
}
