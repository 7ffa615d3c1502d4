//! Channel- and head-granular partitioning of a network across the NPU and
//! the CIM macros.
//!
//! Every layer is split into an NPU slice and a CIM slice that run
//! concurrently; layers execute one after another (batch 1, no pipelining).
//! A layer's latency is the slower of its two slices plus any transfer tax,
//! and its energy is the sum over both devices. CIM-resident weights must
//! fit in the macros jointly; weights never move during inference.

mod repair;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use report::{write_layer_csv, LayerCsvRow};

use crate::costmodel::{
    cim_energy, cim_latency, npu_energy, npu_latency, CostError, HardwareConfig,
};
use crate::netir::{count_params, count_traffic, LayerKind, LayerSpec, Network};

/// Channels per CIM depthwise slice: one access accumulates 16 channels.
pub const DEPTHWISE_SPLIT_GRANULARITY: u32 = 16;

/// Upper bound on joint split combinations for [`brute_force_schedule`].
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Latency,
    Energy,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Latency => "latency",
            Objective::Energy => "energy",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "latency" => Ok(Objective::Latency),
            "energy" => Ok(Objective::Energy),
            _ => Err(format!(
                "unknown objective `{s}` (expected latency or energy)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Npu,
    Cim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub layer: usize,
    pub npu_share: u32,
    pub cim_share: u32,
    pub cim_macros_used: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub objective: Objective,
    pub assignments: Vec<Assignment>,
}

impl Schedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("schedule serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Cost of one scheduled layer. Times are seconds, energies nJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub layer: usize,
    pub kind: LayerKind,
    pub npu_share: u32,
    pub cim_share: u32,
    pub npu_time: f64,
    pub cim_time: f64,
    pub transfer_time: f64,
    pub npu_energy: f64,
    pub cim_energy: f64,
    pub transfer_energy: f64,
    pub bottleneck: Device,
}

impl LayerCost {
    pub fn latency(&self) -> f64 {
        self.npu_time.max(self.cim_time) + self.transfer_time
    }

    pub fn energy(&self) -> f64 {
        self.npu_energy + self.cim_energy + self.transfer_energy
    }

    pub fn value(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Latency => self.latency(),
            Objective::Energy => self.energy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total_latency: f64,
    pub total_energy: f64,
    pub layers: Vec<LayerCost>,
}

impl CostReport {
    pub fn from_layers(layers: Vec<LayerCost>) -> Self {
        let total_latency = layers.iter().map(LayerCost::latency).sum();
        let total_energy = layers.iter().map(LayerCost::energy).sum();
        CostReport {
            total_latency,
            total_energy,
            layers,
        }
    }

    pub fn value(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Latency => self.total_latency,
            Objective::Energy => self.total_energy,
        }
    }

    /// True when the totals equal the sums over the per-layer breakdown.
    pub fn is_consistent(&self) -> bool {
        let lat: f64 = self.layers.iter().map(LayerCost::latency).sum();
        let en: f64 = self.layers.iter().map(LayerCost::energy).sum();
        lat == self.total_latency && en == self.total_energy
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("brute force over {combinations} split combinations exceeds the limit of {BRUTE_FORCE_LIMIT}")]
    TooLarge { combinations: u128 },
    #[error("no assignment satisfies the CIM capacity")]
    InfeasibleCapacity,
}

/// Splittable extent of a layer and the step of its CIM share.
///
/// Convolutions, FC and MLP linears split by output channel; attention layers
/// by whole heads. Depthwise slices on CIM come in multiples of 16 channels.
pub fn split_extent(layer: &LayerSpec) -> (u32, u32) {
    match layer.kind {
        k if k.is_attention() => (layer.heads, 1),
        LayerKind::DepthwiseConv2d => (layer.out_ch, DEPTHWISE_SPLIT_GRANULARITY),
        _ => (layer.out_ch, 1),
    }
}

/// The part of `layer` covering `share` output channels (or heads).
pub fn slice_layer(layer: &LayerSpec, share: u32) -> LayerSpec {
    let mut s = layer.clone();
    match layer.kind {
        LayerKind::AttentionQKVGen => return LayerSpec::qkv(layer.spatial, layer.in_ch, share),
        LayerKind::AttentionScore => return LayerSpec::attention_score(layer.spatial, share),
        LayerKind::AttentionContext => return LayerSpec::attention_context(layer.spatial, share),
        LayerKind::DepthwiseConv2d | LayerKind::Elementwise => {
            s.in_ch = share;
            s.out_ch = share;
        }
        _ => s.out_ch = share,
    }
    s
}

/// CIM shares worth considering for a layer, ascending. `[0]` when the layer
/// cannot run on CIM.
pub fn cim_candidates(layer: &LayerSpec, hw: &HardwareConfig) -> Vec<u32> {
    if !hw.cim.supports(layer.kind) {
        return vec![0];
    }
    let (extent, step) = split_extent(layer);
    (0..=extent / step).map(|i| i * step).collect()
}

/// 8-bit weights the CIM slice keeps resident, in bits.
pub fn cim_weight_bits(layer: &LayerSpec, cim_share: u32) -> u64 {
    if cim_share == 0 {
        0
    } else {
        count_params(&slice_layer(layer, cim_share)) * 8
    }
}

/// Costs `layer` with `cim_share` channels (or heads) on CIM and the rest on
/// the NPU. A device with a zero share is not invoked.
pub fn cost_split(
    index: usize,
    layer: &LayerSpec,
    hw: &HardwareConfig,
    cim_share: u32,
) -> Result<LayerCost, CostError> {
    let (extent, _) = split_extent(layer);
    let npu_share = extent - cim_share;
    let (mut npu_time, mut npu_e) = (0.0, 0.0);
    if npu_share > 0 {
        let s = slice_layer(layer, npu_share);
        npu_time = npu_latency(&s, &hw.npu)?;
        npu_e = npu_energy(&s, &hw.npu)?;
    }
    let (mut cim_time, mut cim_e) = (0.0, 0.0);
    let (mut transfer_time, mut transfer_e) = (0.0, 0.0);
    if cim_share > 0 {
        let s = slice_layer(layer, cim_share);
        cim_time = cim_latency(&s, &hw.cim)?;
        cim_e = cim_energy(&s, &hw.cim)?;
        if npu_share > 0 {
            let t = count_traffic(&s);
            let bytes = (t.input_bytes + t.output_bytes) as f64;
            transfer_time = bytes * hw.interconnect.seconds_per_byte;
            transfer_e = bytes * hw.interconnect.nj_per_byte;
        }
    }
    Ok(LayerCost {
        layer: index,
        kind: layer.kind,
        npu_share,
        cim_share,
        npu_time,
        cim_time,
        transfer_time,
        npu_energy: npu_e,
        cim_energy: cim_e,
        transfer_energy: transfer_e,
        bottleneck: if cim_time > npu_time {
            Device::Cim
        } else {
            Device::Npu
        },
    })
}

/// All feasible split options of one layer, CIM share ascending. Options
/// whose CIM slice alone exceeds the total capacity are dropped.
fn layer_options(
    index: usize,
    layer: &LayerSpec,
    hw: &HardwareConfig,
) -> Result<Vec<LayerCost>, CostError> {
    let mut out = Vec::new();
    for share in cim_candidates(layer, hw) {
        match cost_split(index, layer, hw, share) {
            Ok(c) => out.push(c),
            Err(CostError::CapacityExceeded { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Index of the best option; ties go to the larger CIM share.
fn argmin(options: &[LayerCost], objective: Objective) -> usize {
    let mut best = 0;
    for (i, o) in options.iter().enumerate().skip(1) {
        if o.value(objective) <= options[best].value(objective) {
            best = i;
        }
    }
    best
}

fn assignment(c: &LayerCost, hw: &HardwareConfig) -> Assignment {
    Assignment {
        layer: c.layer,
        npu_share: c.npu_share,
        cim_share: c.cim_share,
        cim_macros_used: if c.cim_share > 0 { hw.cim.n_macros } else { 0 },
    }
}

fn finish(
    costs: Vec<LayerCost>,
    hw: &HardwareConfig,
    objective: Objective,
) -> (Schedule, CostReport) {
    let schedule = Schedule {
        objective,
        assignments: costs.iter().map(|c| assignment(c, hw)).collect(),
    };
    (schedule, CostReport::from_layers(costs))
}

/// Best split of a single layer, ignoring capacity shared with other layers.
pub fn split_layer(
    layer: &LayerSpec,
    hw: &HardwareConfig,
    objective: Objective,
) -> Result<Assignment, CostError> {
    let options = layer_options(0, layer, hw)?;
    Ok(assignment(&options[argmin(&options, objective)], hw))
}

/// Schedules every layer at its individually best split. If the CIM weights
/// then exceed capacity, the splits are re-chosen jointly as a
/// multiple-choice knapsack over resident bits (see `repair`).
pub fn schedule_network(
    network: &Network,
    hw: &HardwareConfig,
    objective: Objective,
) -> Result<(Schedule, CostReport), ScheduleError> {
    let options: Vec<Vec<LayerCost>> = network
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| layer_options(i, l, hw))
        .collect::<Result<_, _>>()?;
    let mut chosen: Vec<usize> = options.iter().map(|o| argmin(o, objective)).collect();

    let bits = |i: usize, k: usize| cim_weight_bits(&network.layers[i], options[i][k].cim_share);
    let capacity = hw.cim.total_capacity_bits();
    let used: u64 = chosen.iter().enumerate().map(|(i, &k)| bits(i, k)).sum();

    if used > capacity {
        let menus: Vec<repair::Menu> = options
            .iter()
            .enumerate()
            .map(|(i, o)| {
                repair::Menu::new(
                    (0..o.len()).map(|k| bits(i, k)).collect(),
                    o.iter().map(|c| c.value(objective)).collect(),
                )
            })
            .collect();
        chosen = repair::fit(&menus, capacity).ok_or(ScheduleError::InfeasibleCapacity)?;
    }

    let costs = chosen
        .iter()
        .enumerate()
        .map(|(i, &k)| options[i][k].clone())
        .collect();
    Ok(finish(costs, hw, objective))
}

/// Everything on the NPU.
pub fn npu_only_report(network: &Network, hw: &HardwareConfig) -> Result<CostReport, CostError> {
    let costs = network
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| cost_split(i, l, hw, 0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CostReport::from_layers(costs))
}

/// Exhaustive joint search over every layer's split options under the
/// capacity constraint. Only for small networks; see [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_schedule(
    network: &Network,
    hw: &HardwareConfig,
    objective: Objective,
) -> Result<(Schedule, CostReport), ScheduleError> {
    let options: Vec<Vec<LayerCost>> = network
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| layer_options(i, l, hw))
        .collect::<Result<_, _>>()?;
    let combinations = options
        .iter()
        .try_fold(1u128, |acc, o| acc.checked_mul(o.len() as u128))
        .unwrap_or(u128::MAX);
    if combinations > BRUTE_FORCE_LIMIT {
        return Err(ScheduleError::TooLarge { combinations });
    }
    let bits: Vec<Vec<u64>> = options
        .iter()
        .enumerate()
        .map(|(i, o)| {
            o.iter()
                .map(|c| cim_weight_bits(&network.layers[i], c.cim_share))
                .collect()
        })
        .collect();
    let capacity = hw.cim.total_capacity_bits();

    let n = options.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let used: u64 = (0..n).map(|i| bits[i][idx[i]]).sum();
        if used <= capacity {
            let costs: Vec<&LayerCost> = (0..n).map(|i| &options[i][idx[i]]).collect();
            let value: f64 = match objective {
                Objective::Latency => costs.iter().map(|c| c.latency()).sum(),
                Objective::Energy => costs.iter().map(|c| c.energy()).sum(),
            };
            if best.as_ref().is_none_or(|b| value < b.0) {
                best = Some((value, idx.clone()));
            }
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                let (_, pick) = best.ok_or(ScheduleError::InfeasibleCapacity)?;
                let costs = pick
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| options[i][k].clone())
                    .collect();
                return Ok(finish(costs, hw, objective));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(layers: Vec<LayerSpec>) -> Network {
        Network {
            layers,
            ..Default::default()
        }
    }

    #[test]
    fn empty_network_is_free() {
        let hw = HardwareConfig::sample();
        let (s, r) = schedule_network(&Network::default(), &hw, Objective::Latency).unwrap();
        assert!(s.assignments.is_empty());
        assert_eq!((r.total_latency, r.total_energy), (0.0, 0.0));
    }

    #[test]
    fn no_macros_means_all_npu() {
        let hw = HardwareConfig::sample().with_macros(0);
        let l = LayerSpec::depthwise((16, 16), 32, 3, 1);
        let a = split_layer(&l, &hw, Objective::Latency).unwrap();
        assert_eq!((a.npu_share, a.cim_share, a.cim_macros_used), (32, 0, 0));
    }

    #[test]
    fn depthwise_split_granularity() {
        let hw = HardwareConfig::sample();
        let l = LayerSpec::depthwise((16, 16), 40, 3, 1);
        assert_eq!(cim_candidates(&l, &hw), vec![0, 16, 32]);
        let a = split_layer(&l, &hw, Objective::Latency).unwrap();
        assert_eq!(a.cim_share % 16, 0);
        assert_eq!(a.npu_share + a.cim_share, 40);
    }

    #[test]
    fn attention_splits_whole_heads() {
        let hw = HardwareConfig::sample();
        let q = LayerSpec::qkv((14, 14), 64, 6);
        assert_eq!(split_extent(&q), (6, 1));
        assert_eq!(slice_layer(&q, 2).out_ch, 48);
        let score = LayerSpec::attention_score((14, 14), 6);
        assert_eq!(cim_candidates(&score, &hw), vec![0]);
    }

    #[test]
    fn cim_beats_npu_on_depthwise() {
        let hw = HardwareConfig::sample();
        let n = net(vec![LayerSpec::depthwise((56, 56), 96, 3, 1)]);
        let (_, r) = schedule_network(&n, &hw, Objective::Latency).unwrap();
        let base = npu_only_report(&n, &hw).unwrap();
        assert!(r.total_latency < base.total_latency);
        assert!(r.is_consistent());
    }

    #[test]
    fn starved_capacity_degenerates_to_npu_only() {
        let mut hw = HardwareConfig::sample();
        hw.cim.n_macros = 1;
        hw.cim.capacity_bits = 8;
        let n = net(vec![
            LayerSpec::depthwise((28, 28), 64, 3, 1),
            LayerSpec::pointwise((28, 28), 64, 64),
        ]);
        let (s, r) = schedule_network(&n, &hw, Objective::Latency).unwrap();
        assert!(s.assignments.iter().all(|a| a.cim_share == 0));
        assert_eq!(r, npu_only_report(&n, &hw).unwrap());
    }

    #[test]
    fn brute_force_refuses_large_networks() {
        let hw = HardwareConfig::sample();
        let n = net(vec![LayerSpec::fully_connected(64, 1000); 3]);
        assert!(matches!(
            brute_force_schedule(&n, &hw, Objective::Latency),
            Err(ScheduleError::TooLarge { .. })
        ));
    }

    #[test]
    fn transfer_tax_applies_to_split_layers_only() {
        let mut hw = HardwareConfig::sample();
        hw.interconnect.nj_per_byte = 1.0;
        let l = LayerSpec::pointwise((8, 8), 32, 32);
        let split = cost_split(0, &l, &hw, 16).unwrap();
        let s = slice_layer(&l, 16);
        let t = count_traffic(&s);
        assert_eq!(
            split.transfer_energy,
            (t.input_bytes + t.output_bytes) as f64
        );
        assert_eq!(cost_split(0, &l, &hw, 32).unwrap().transfer_energy, 0.0);
        assert_eq!(cost_split(0, &l, &hw, 0).unwrap().transfer_energy, 0.0);
    }

    #[test]
    fn objective_parsing() {
        assert_eq!("energy".parse::<Objective>(), Ok(Objective::Energy));
        assert!("speed".parse::<Objective>().is_err());
        assert_eq!(Objective::Latency.to_string(), "latency");
    }
}
