use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::choice::{validate, BlockChoice, SubnetChoice};
use super::layer::{LayerSpec, HEAD_DIM, NUM_CLASSES};
use super::space::{BlockKind, BlockSpec, SearchSpace};
use super::workload::{count_macs, count_params};
use super::NetirError;

/// Channels of the network input image.
pub const INPUT_CHANNELS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitKind {
    Stem,
    Irb,
    Vit,
    Head,
}

/// A contiguous run of layers produced by one repetition of a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub block: String,
    pub kind: UnitKind,
    pub layers: Range<usize>,
}

/// Sequential layer list plus skip edges. A residual `(from, to)` adds the input
/// of layer `from` to the output of layer `to`; edges are bookkeeping only and
/// carry no cost.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub residuals: Vec<(usize, usize)>,
    #[serde(default)]
    pub units: Vec<Unit>,
}

impl Network {
    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(count_macs).sum()
    }

    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(count_params).sum()
    }

    pub fn count_units(&self, kind: UnitKind) -> usize {
        self.units.iter().filter(|u| u.kind == kind).count()
    }

    /// Checks every layer and that each layer's output shape feeds the next.
    pub fn check(&self) -> Result<(), NetirError> {
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()
                .map_err(|e| NetirError::InvalidNetwork(format!("layer {i}: {e}")))?;
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            if a.out_ch != b.in_ch || a.out_spatial() != b.spatial {
                return Err(NetirError::InvalidNetwork(format!(
                    "layer {i} produces {}x{:?} but layer {} expects {}x{:?}",
                    a.out_ch,
                    a.out_spatial(),
                    i + 1,
                    b.in_ch,
                    b.spatial
                )));
            }
        }
        for &(from, to) in &self.residuals {
            if from > to || to >= self.layers.len() {
                return Err(NetirError::InvalidNetwork(format!(
                    "residual ({from},{to}) out of range"
                )));
            }
            let (a, b) = (&self.layers[from], &self.layers[to]);
            if a.in_ch != b.out_ch || a.spatial != b.out_spatial() {
                return Err(NetirError::InvalidNetwork(format!(
                    "residual ({from},{to}) joins mismatched shapes"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, NetirError> {
        let net: Network = serde_json::from_str(text)?;
        net.check()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }
}

fn scale(ch: u32, ratio: f64) -> u32 {
    ((ch as f64 * ratio).round() as u32).max(1)
}

struct Builder {
    net: Network,
    hw: (u32, u32),
    ch: u32,
}

impl Builder {
    fn push(&mut self, layer: LayerSpec) -> usize {
        self.hw = layer.out_spatial();
        self.ch = layer.out_ch;
        self.net.layers.push(layer);
        self.net.layers.len() - 1
    }

    fn unit(&mut self, block: &str, kind: UnitKind, start: usize) {
        self.net.units.push(Unit {
            block: block.to_string(),
            kind,
            layers: start..self.net.layers.len(),
        });
    }

    fn stem(&mut self, spec: &BlockSpec, c: &BlockChoice) {
        for i in 0..c.depth {
            let start = self.net.layers.len();
            let stride = if i == 0 { spec.stride } else { 1 };
            self.push(LayerSpec::conv(self.hw, self.ch, c.width, 3, stride));
            self.unit(&spec.name, UnitKind::Stem, start);
        }
    }

    /// Inverted residual: [pw expand] -> dw 3x3 -> pw project. The expansion
    /// pointwise is omitted at ratio 1.
    fn irb(&mut self, spec: &BlockSpec, c: &BlockChoice) {
        let exp = c.exp_ratio.unwrap_or(1.0);
        for i in 0..c.depth {
            let start = self.net.layers.len();
            let stride = if i == 0 { spec.stride } else { 1 };
            let cin = self.ch;
            let hidden = scale(cin, exp);
            if hidden != cin {
                self.push(LayerSpec::pointwise(self.hw, cin, hidden));
            }
            self.push(LayerSpec::depthwise(self.hw, self.ch, 3, stride));
            let end = self.push(LayerSpec::pointwise(self.hw, self.ch, c.width));
            if stride == 1 && cin == c.width {
                self.net.residuals.push((start, end));
            }
            self.unit(&spec.name, UnitKind::Irb, start);
        }
    }

    /// Transformer encoder on feature-map tokens: Q/K/V generation of the
    /// searched width, score and context matmuls over `width / 8` heads, and a
    /// two-layer MLP of hidden size `ratio * width` that returns to the width.
    /// The width is the block's embedding size, so the first layer of a block
    /// entered with a different channel count has no attention skip.
    fn vit(&mut self, spec: &BlockSpec, c: &BlockChoice) {
        let heads = c.width / HEAD_DIM;
        let hidden = scale(c.width, c.exp_ratio.unwrap_or(1.0));
        for _ in 0..c.depth {
            let start = self.net.layers.len();
            let embed = self.ch;
            self.push(LayerSpec::qkv(self.hw, embed, heads));
            self.push(LayerSpec::attention_score(self.hw, heads));
            let ctx = self.push(LayerSpec::attention_context(self.hw, heads));
            let mlp = self.push(LayerSpec::mlp(self.hw, c.width, hidden));
            let end = self.push(LayerSpec::mlp(self.hw, hidden, c.width));
            if embed == c.width {
                self.net.residuals.push((start, ctx));
            }
            self.net.residuals.push((mlp, end));
            self.unit(&spec.name, UnitKind::Vit, start);
        }
    }

    /// Pointwise expansion, global pool, feature FC and the 1000-way classifier.
    fn head(&mut self, spec: &BlockSpec, c: &BlockChoice) {
        let exp = c.exp_ratio.unwrap_or(1.0);
        for _ in 0..c.depth {
            let start = self.net.layers.len();
            let hidden = scale(self.ch, exp);
            self.push(LayerSpec::pointwise(self.hw, self.ch, hidden));
            self.push(LayerSpec::global_pool(self.hw, self.ch));
            self.push(LayerSpec::fully_connected(self.ch, c.width));
            self.push(LayerSpec::fully_connected(self.ch, NUM_CLASSES));
            self.unit(&spec.name, UnitKind::Head, start);
        }
    }
}

/// Expands a valid choice into its layer sequence.
pub fn materialize(space: &SearchSpace, choice: &SubnetChoice) -> Result<Network, NetirError> {
    let violations = validate(space, choice);
    if !violations.is_empty() {
        return Err(NetirError::InvalidChoice(violations));
    }
    let mut b = Builder {
        net: Network::default(),
        hw: (choice.resolution, choice.resolution),
        ch: INPUT_CHANNELS,
    };
    for (spec, c) in space.blocks.iter().zip(&choice.blocks) {
        match spec.kind {
            BlockKind::PlainConv => b.stem(spec, c),
            BlockKind::MBConv => b.irb(spec, c),
            BlockKind::ViT => b.vit(spec, c),
            BlockKind::MBPool => b.head(spec, c),
        }
    }
    Ok(b.net)
}
