use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Channels per attention head. Every transformer in the space uses 8-wide heads.
pub const HEAD_DIM: u32 = 8;

/// Classifier width emitted by the pooling head.
pub const NUM_CLASSES: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayerKind {
    Conv2d,
    DepthwiseConv2d,
    PointwiseConv2d,
    FullyConnected,
    AttentionQKVGen,
    AttentionScore,
    AttentionContext,
    MLPLinear,
    Elementwise,
}

impl LayerKind {
    pub const ALL: [LayerKind; 9] = [
        LayerKind::Conv2d,
        LayerKind::DepthwiseConv2d,
        LayerKind::PointwiseConv2d,
        LayerKind::FullyConnected,
        LayerKind::AttentionQKVGen,
        LayerKind::AttentionScore,
        LayerKind::AttentionContext,
        LayerKind::MLPLinear,
        LayerKind::Elementwise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "Conv2d",
            LayerKind::DepthwiseConv2d => "DepthwiseConv2d",
            LayerKind::PointwiseConv2d => "PointwiseConv2d",
            LayerKind::FullyConnected => "FullyConnected",
            LayerKind::AttentionQKVGen => "AttentionQKVGen",
            LayerKind::AttentionScore => "AttentionScore",
            LayerKind::AttentionContext => "AttentionContext",
            LayerKind::MLPLinear => "MLPLinear",
            LayerKind::Elementwise => "Elementwise",
        }
    }

    /// Attention kinds are partitioned by whole heads rather than by channels.
    pub fn is_attention(self) -> bool {
        matches!(
            self,
            LayerKind::AttentionQKVGen | LayerKind::AttentionScore | LayerKind::AttentionContext
        )
    }

    /// Kinds whose weights are static and could live in a CIM macro.
    pub fn has_static_weights(self) -> bool {
        !matches!(
            self,
            LayerKind::AttentionScore | LayerKind::AttentionContext | LayerKind::Elementwise
        )
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayerKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown layer kind `{s}`"))
    }
}

/// One compute layer at batch size 1.
///
/// `spatial` is the *input* feature-map size. Convolutions use "same" padding,
/// so the output size is `ceil(H / stride)`. Token-wise layers (Q/K/V generation,
/// attention matmuls, MLP linears) treat every spatial position as a token and
/// keep the spatial size. Attention layers carry their head count; the Q/K/V width
/// is always `heads * HEAD_DIM`.
///
/// Channel conventions for attention, chosen so that adjacent layers chain:
/// Q/K/V generation maps `C -> 3·heads·8`, the score matmul consumes that tensor and
/// hands on `heads·8` channels, and the context matmul is `heads·8 -> heads·8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub spatial: (u32, u32),
    pub in_ch: u32,
    pub out_ch: u32,
    pub kernel: (u32, u32),
    pub stride: u32,
    #[serde(default)]
    pub heads: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayerError {
    #[error("{kind}: {reason}")]
    Malformed { kind: LayerKind, reason: String },
}

impl LayerSpec {
    pub fn conv(hw: (u32, u32), in_ch: u32, out_ch: u32, k: u32, stride: u32) -> Self {
        LayerSpec {
            kind: LayerKind::Conv2d,
            spatial: hw,
            in_ch,
            out_ch,
            kernel: (k, k),
            stride,
            heads: 0,
        }
    }

    pub fn depthwise(hw: (u32, u32), ch: u32, k: u32, stride: u32) -> Self {
        LayerSpec {
            kind: LayerKind::DepthwiseConv2d,
            spatial: hw,
            in_ch: ch,
            out_ch: ch,
            kernel: (k, k),
            stride,
            heads: 0,
        }
    }

    pub fn pointwise(hw: (u32, u32), in_ch: u32, out_ch: u32) -> Self {
        LayerSpec {
            kind: LayerKind::PointwiseConv2d,
            spatial: hw,
            in_ch,
            out_ch,
            kernel: (1, 1),
            stride: 1,
            heads: 0,
        }
    }

    pub fn fully_connected(in_ch: u32, out_ch: u32) -> Self {
        LayerSpec {
            kind: LayerKind::FullyConnected,
            spatial: (1, 1),
            in_ch,
            out_ch,
            kernel: (1, 1),
            stride: 1,
            heads: 0,
        }
    }

    pub fn qkv(hw: (u32, u32), in_ch: u32, heads: u32) -> Self {
        LayerSpec {
            kind: LayerKind::AttentionQKVGen,
            spatial: hw,
            in_ch,
            out_ch: 3 * heads * HEAD_DIM,
            kernel: (1, 1),
            stride: 1,
            heads,
        }
    }

    pub fn attention_score(hw: (u32, u32), heads: u32) -> Self {
        LayerSpec {
            kind: LayerKind::AttentionScore,
            spatial: hw,
            in_ch: 3 * heads * HEAD_DIM,
            out_ch: heads * HEAD_DIM,
            kernel: (1, 1),
            stride: 1,
            heads,
        }
    }

    pub fn attention_context(hw: (u32, u32), heads: u32) -> Self {
        LayerSpec {
            kind: LayerKind::AttentionContext,
            spatial: hw,
            in_ch: heads * HEAD_DIM,
            out_ch: heads * HEAD_DIM,
            kernel: (1, 1),
            stride: 1,
            heads,
        }
    }

    pub fn mlp(hw: (u32, u32), in_ch: u32, out_ch: u32) -> Self {
        LayerSpec {
            kind: LayerKind::MLPLinear,
            spatial: hw,
            in_ch,
            out_ch,
            kernel: (1, 1),
            stride: 1,
            heads: 0,
        }
    }

    pub fn elementwise(hw: (u32, u32), ch: u32) -> Self {
        LayerSpec {
            kind: LayerKind::Elementwise,
            spatial: hw,
            in_ch: ch,
            out_ch: ch,
            kernel: (1, 1),
            stride: 1,
            heads: 0,
        }
    }

    /// Global average pooling: one window covering the whole map.
    pub fn global_pool(hw: (u32, u32), ch: u32) -> Self {
        LayerSpec {
            kind: LayerKind::Elementwise,
            spatial: hw,
            in_ch: ch,
            out_ch: ch,
            kernel: hw,
            stride: hw.0.max(hw.1),
            heads: 0,
        }
    }

    pub fn out_spatial(&self) -> (u32, u32) {
        match self.kind {
            LayerKind::Conv2d
            | LayerKind::DepthwiseConv2d
            | LayerKind::PointwiseConv2d
            | LayerKind::Elementwise => (
                self.spatial.0.div_ceil(self.stride),
                self.spatial.1.div_ceil(self.stride),
            ),
            LayerKind::FullyConnected => (1, 1),
            _ => self.spatial,
        }
    }

    /// Sequence length seen by token-wise layers.
    pub fn tokens(&self) -> u64 {
        self.spatial.0 as u64 * self.spatial.1 as u64
    }

    pub fn validate(&self) -> Result<(), LayerError> {
        let bad = |reason: String| {
            Err(LayerError::Malformed {
                kind: self.kind,
                reason,
            })
        };
        if self.spatial.0 == 0 || self.spatial.1 == 0 {
            return bad("empty spatial extent".into());
        }
        if self.in_ch == 0 || self.out_ch == 0 {
            return bad("zero channels".into());
        }
        if self.stride == 0 || self.kernel.0 == 0 || self.kernel.1 == 0 {
            return bad("zero kernel or stride".into());
        }
        match self.kind {
            LayerKind::DepthwiseConv2d if self.in_ch != self.out_ch => {
                bad(format!("in_ch {} != out_ch {}", self.in_ch, self.out_ch))
            }
            LayerKind::PointwiseConv2d if self.kernel != (1, 1) => {
                bad(format!("kernel {:?} is not 1x1", self.kernel))
            }
            LayerKind::FullyConnected if self.spatial != (1, 1) => {
                bad(format!("spatial {:?} is not 1x1", self.spatial))
            }
            LayerKind::AttentionQKVGen
                if self.heads == 0 || self.out_ch != 3 * self.heads * HEAD_DIM =>
            {
                bad(format!(
                    "out_ch {} != 3 * heads {} * {HEAD_DIM}",
                    self.out_ch, self.heads
                ))
            }
            LayerKind::AttentionScore
                if self.heads == 0
                    || self.in_ch != 3 * self.heads * HEAD_DIM
                    || self.out_ch != self.heads * HEAD_DIM =>
            {
                bad(format!(
                    "channels {}->{} do not match {} heads",
                    self.in_ch, self.out_ch, self.heads
                ))
            }
            LayerKind::AttentionContext
                if self.heads == 0
                    || self.in_ch != self.heads * HEAD_DIM
                    || self.out_ch != self.heads * HEAD_DIM =>
            {
                bad(format!(
                    "channels {}->{} do not match {} heads",
                    self.in_ch, self.out_ch, self.heads
                ))
            }
            LayerKind::Elementwise if self.in_ch != self.out_ch => {
                bad(format!("in_ch {} != out_ch {}", self.in_ch, self.out_ch))
            }
            _ => Ok(()),
        }
    }
}
