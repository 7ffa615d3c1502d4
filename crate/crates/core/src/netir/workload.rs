//! Workload arithmetic for a single layer: MACs, parameters and 8-bit tensor traffic.

use serde::{Deserialize, Serialize};

use super::layer::{LayerKind, LayerSpec, HEAD_DIM};

/// Bytes moved by one layer invocation. All tensors are 8-bit, so bytes equal elements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traffic {
    pub input_bytes: u64,
    pub weight_bytes: u64,
    pub output_bytes: u64,
}

impl Traffic {
    pub fn total(&self) -> u64 {
        self.input_bytes + self.weight_bytes + self.output_bytes
    }
}

fn out_pixels(layer: &LayerSpec) -> u64 {
    let (ho, wo) = layer.out_spatial();
    ho as u64 * wo as u64
}

pub fn count_macs(layer: &LayerSpec) -> u64 {
    let cin = layer.in_ch as u64;
    let cout = layer.out_ch as u64;
    let taps = layer.kernel.0 as u64 * layer.kernel.1 as u64;
    match layer.kind {
        LayerKind::Conv2d => out_pixels(layer) * cout * cin * taps,
        LayerKind::DepthwiseConv2d => out_pixels(layer) * cout * taps,
        LayerKind::PointwiseConv2d => out_pixels(layer) * cout * cin,
        LayerKind::FullyConnected => cin * cout,
        LayerKind::AttentionQKVGen | LayerKind::MLPLinear => layer.tokens() * cin * cout,
        LayerKind::AttentionScore | LayerKind::AttentionContext => {
            let n = layer.tokens();
            layer.heads as u64 * n * n * HEAD_DIM as u64
        }
        LayerKind::Elementwise => 0,
    }
}

pub fn count_params(layer: &LayerSpec) -> u64 {
    let cin = layer.in_ch as u64;
    let cout = layer.out_ch as u64;
    let taps = layer.kernel.0 as u64 * layer.kernel.1 as u64;
    match layer.kind {
        LayerKind::Conv2d => cout * cin * taps,
        LayerKind::DepthwiseConv2d => cout * taps,
        LayerKind::PointwiseConv2d
        | LayerKind::FullyConnected
        | LayerKind::AttentionQKVGen
        | LayerKind::MLPLinear => cin * cout,
        LayerKind::AttentionScore | LayerKind::AttentionContext | LayerKind::Elementwise => 0,
    }
}

pub fn count_traffic(layer: &LayerSpec) -> Traffic {
    let weight_bytes = count_params(layer);
    let n = layer.tokens();
    let width = layer.heads as u64 * HEAD_DIM as u64;
    match layer.kind {
        // Q and K in, one N x N map per head out.
        LayerKind::AttentionScore => Traffic {
            input_bytes: 2 * n * width,
            weight_bytes,
            output_bytes: layer.heads as u64 * n * n,
        },
        // Attention maps and V in, per-token context out.
        LayerKind::AttentionContext => Traffic {
            input_bytes: layer.heads as u64 * n * n + n * width,
            weight_bytes,
            output_bytes: n * width,
        },
        _ => Traffic {
            input_bytes: n * layer.in_ch as u64,
            weight_bytes,
            output_bytes: out_pixels(layer) * layer.out_ch as u64,
        },
    }
}
