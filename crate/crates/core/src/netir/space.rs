use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::NetirError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    PlainConv,
    MBConv,
    ViT,
    MBPool,
}

/// Inclusive integer range on a fixed step grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub min: u32,
    pub max: u32,
    #[serde(default = "unit_step")]
    pub step: u32,
}

fn unit_step() -> u32 {
    1
}

impl IntRange {
    pub const fn new(min: u32, max: u32, step: u32) -> Self {
        IntRange { min, max, step }
    }

    pub const fn fixed(v: u32) -> Self {
        IntRange {
            min: v,
            max: v,
            step: 1,
        }
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: usize) -> u32 {
        self.min + index as u32 * self.step
    }

    pub fn index_of(&self, v: u32) -> Option<usize> {
        if v < self.min || v > self.max || !(v - self.min).is_multiple_of(self.step) {
            None
        } else {
            Some(((v - self.min) / self.step) as usize)
        }
    }

    pub fn values(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len()).map(move |i| self.value(i))
    }

    fn check(&self, what: &str) -> Result<(), String> {
        if self.step == 0 {
            return Err(format!("{what}: step must be positive"));
        }
        if self.min > self.max {
            return Err(format!("{what}: min {} > max {}", self.min, self.max));
        }
        if !(self.max - self.min).is_multiple_of(self.step) {
            return Err(format!(
                "{what}: range {}..{} is not a multiple of step {}",
                self.min, self.max, self.step
            ));
        }
        Ok(())
    }
}

/// Inclusive ratio range on a fixed step grid (expansion ratios).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioRange {
    pub min: f64,
    pub max: f64,
    #[serde(default = "unit_ratio_step")]
    pub step: f64,
}

fn unit_ratio_step() -> f64 {
    1.0
}

const GRID_EPS: f64 = 1e-9;

impl RatioRange {
    pub const fn new(min: f64, max: f64, step: f64) -> Self {
        RatioRange { min, max, step }
    }

    pub const fn fixed(v: f64) -> Self {
        RatioRange {
            min: v,
            max: v,
            step: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: usize) -> f64 {
        if index + 1 == self.len() {
            self.max
        } else {
            self.min + index as f64 * self.step
        }
    }

    pub fn index_of(&self, v: f64) -> Option<usize> {
        if !v.is_finite() || v < self.min - GRID_EPS || v > self.max + GRID_EPS {
            return None;
        }
        let k = (v - self.min) / self.step;
        let i = k.round();
        ((k - i).abs() < GRID_EPS).then_some(i as usize)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.value(i))
    }

    fn check(&self, what: &str) -> Result<(), String> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) {
            return Err(format!("{what}: non-finite bound"));
        }
        if self.min <= 0.0 || self.step <= 0.0 {
            return Err(format!("{what}: min and step must be positive"));
        }
        if self.min > self.max {
            return Err(format!("{what}: min {} > max {}", self.min, self.max));
        }
        let k = (self.max - self.min) / self.step;
        if (k - k.round()).abs() > GRID_EPS {
            return Err(format!(
                "{what}: range {}..{} is not a multiple of step {}",
                self.min, self.max, self.step
            ));
        }
        Ok(())
    }
}

/// One searchable row of the space: a named block with width, depth and
/// expansion-ratio ranges. Stride applies to the first layer of the block only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub name: String,
    pub kind: BlockKind,
    pub width: IntRange,
    pub depth: IntRange,
    /// `None` where the ratio is not searchable (the stem conv).
    pub exp_ratio: Option<RatioRange>,
    pub stride: u32,
}

impl BlockSpec {
    fn exp_choices(&self) -> usize {
        self.exp_ratio.map_or(1, |r| r.len())
    }

    pub fn choices(&self) -> usize {
        self.width.len() * self.depth.len() * self.exp_choices()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub blocks: Vec<BlockSpec>,
    /// Square input sizes, ascending.
    pub resolutions: Vec<u32>,
}

fn block(
    name: &str,
    kind: BlockKind,
    width: (u32, u32),
    depth: (u32, u32),
    exp_ratio: Option<RatioRange>,
    stride: u32,
) -> BlockSpec {
    BlockSpec {
        name: name.to_string(),
        kind,
        width: IntRange::new(width.0, width.1, 8),
        depth: IntRange::new(depth.0, depth.1, 1),
        exp_ratio,
        stride,
    }
}

const IRB_EXP: Option<RatioRange> = Some(RatioRange::new(4.0, 6.0, 1.0));
const MLP_EXP: Option<RatioRange> = Some(RatioRange::new(1.0, 2.0, 0.5));

/// The 20-block hybrid space: a stem conv, IRB stages that are each optionally
/// followed by a transformer stage, and a pooling head.
pub fn default_space() -> SearchSpace {
    use BlockKind::*;
    let fixed = |v: f64| Some(RatioRange::fixed(v));
    SearchSpace {
        blocks: vec![
            block("Conv-0", PlainConv, (16, 32), (1, 1), None, 2),
            block("MBConv-1", MBConv, (16, 32), (1, 2), fixed(1.0), 1),
            block("MBConv-2", MBConv, (32, 64), (2, 6), IRB_EXP, 2),
            block("MBConv-3", MBConv, (32, 64), (2, 6), IRB_EXP, 2),
            block("ViT-3", ViT, (24, 64), (0, 1), MLP_EXP, 1),
            block("MBConv-4-1", MBConv, (64, 96), (1, 3), IRB_EXP, 2),
            block("ViT-4-1", ViT, (48, 96), (0, 2), MLP_EXP, 1),
            block("MBConv-4-2", MBConv, (64, 96), (0, 3), IRB_EXP, 1),
            block("ViT-4-2", ViT, (48, 96), (0, 2), MLP_EXP, 1),
            block("MBConv-5-1", MBConv, (96, 128), (3, 4), IRB_EXP, 1),
            block("ViT-5-1", ViT, (64, 128), (0, 2), MLP_EXP, 1),
            block("MBConv-5-2", MBConv, (96, 128), (0, 4), IRB_EXP, 1),
            block("ViT-5-2", ViT, (64, 128), (0, 2), MLP_EXP, 1),
            block("MBConv-6-1", MBConv, (192, 224), (2, 4), IRB_EXP, 2),
            block("ViT-6-1", ViT, (144, 224), (0, 2), MLP_EXP, 1),
            block("MBConv-6-2", MBConv, (192, 224), (0, 4), IRB_EXP, 1),
            block("ViT-6-2", ViT, (144, 224), (0, 2), MLP_EXP, 1),
            block("MBConv-7", MBConv, (224, 240), (1, 2), fixed(6.0), 1),
            block("ViT-7", ViT, (176, 240), (0, 3), MLP_EXP, 1),
            block("MBPool", MBPool, (1792, 1984), (1, 1), fixed(6.0), 1),
        ],
        resolutions: vec![192, 224, 256, 288],
    }
}

impl SearchSpace {
    pub fn block(&self, name: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<(), NetirError> {
        let err = |m: String| Err(NetirError::InvalidSpace(m));
        if self.blocks.is_empty() {
            return err("no blocks".into());
        }
        if self.blocks[0].kind != BlockKind::PlainConv {
            return err(format!(
                "first block `{}` is not a PlainConv",
                self.blocks[0].name
            ));
        }
        let mut names = BTreeSet::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if !names.insert(b.name.as_str()) {
                return err(format!("duplicate block name `{}`", b.name));
            }
            let at = |field: &str| format!("{}/{field}", b.name);
            b.width.check(&at("width")).or_else(err)?;
            b.depth.check(&at("depth")).or_else(err)?;
            if b.width.min == 0 {
                return err(format!("{}: width must be positive", at("width")));
            }
            if !(b.stride == 1 || b.stride == 2) {
                return err(format!(
                    "{}: stride {} not in {{1,2}}",
                    at("stride"),
                    b.stride
                ));
            }
            match (b.kind, &b.exp_ratio) {
                (BlockKind::PlainConv, Some(_)) => {
                    return err(format!(
                        "{}: not searchable for a plain conv",
                        at("exp_ratio")
                    ))
                }
                (BlockKind::PlainConv, None) => {}
                (_, None) => return err(format!("{}: missing", at("exp_ratio"))),
                (_, Some(r)) => r.check(&at("exp_ratio")).or_else(err)?,
            }
            match b.kind {
                BlockKind::PlainConv if b.depth.min == 0 => {
                    return err(format!(
                        "{}: a plain conv needs at least one layer",
                        at("depth")
                    ))
                }
                BlockKind::MBPool if (b.depth.min, b.depth.max) != (1, 1) => {
                    return err(format!(
                        "{}: the pooling head has exactly one layer",
                        at("depth")
                    ))
                }
                BlockKind::MBPool if i + 1 != self.blocks.len() => {
                    return err(format!(
                        "`{}`: the pooling head must be the last block",
                        b.name
                    ))
                }
                BlockKind::ViT => {
                    if i == 0 || self.blocks[i - 1].kind != BlockKind::MBConv {
                        return err(format!(
                            "`{}`: a ViT block must follow an MBConv block",
                            b.name
                        ));
                    }
                    if b.stride != 1 {
                        return err(format!("{}: ViT blocks keep resolution", at("stride")));
                    }
                    if b.width.min % super::HEAD_DIM != 0 || b.width.step % super::HEAD_DIM != 0 {
                        return err(format!(
                            "{}: ViT widths must be multiples of the head size {}",
                            at("width"),
                            super::HEAD_DIM
                        ));
                    }
                }
                _ => {}
            }
        }
        if self.resolutions.is_empty() {
            return err("no input resolutions".into());
        }
        if self.resolutions.contains(&0) {
            return err("resolution 0".into());
        }
        if self.resolutions.windows(2).any(|w| w[0] >= w[1]) {
            return err("resolutions must be strictly ascending".into());
        }
        Ok(())
    }

    /// Number of distinct subnet choices: the product of per-block grid sizes
    /// times the number of resolutions.
    pub fn cardinality(&self) -> BigUint {
        self.blocks
            .iter()
            .fold(BigUint::from(self.resolutions.len()), |acc, b| {
                acc * BigUint::from(b.choices())
            })
    }

    pub fn from_json(text: &str) -> Result<Self, NetirError> {
        let space: SearchSpace = serde_json::from_str(text)?;
        space.validate()?;
        Ok(space)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }
}

/// Free-function form of [`SearchSpace::cardinality`].
pub fn space_cardinality(space: &SearchSpace) -> BigUint {
    space.cardinality()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_space_rows() {
        let s = default_space();
        s.validate().unwrap();
        assert_eq!(s.blocks.len(), 20);
        let mb2 = s.block("MBConv-2").unwrap();
        assert_eq!((mb2.width.min, mb2.width.max), (32, 64));
        assert_eq!((mb2.depth.min, mb2.depth.max), (2, 6));
        let e = mb2.exp_ratio.unwrap();
        assert_eq!((e.min, e.max), (4.0, 6.0));
        assert_eq!(mb2.stride, 2);
        let vit7 = s.block("ViT-7").unwrap();
        assert_eq!((vit7.depth.min, vit7.depth.max), (0, 3));
        assert_eq!(s.resolutions, vec![192, 224, 256, 288]);
        assert_eq!(s.blocks[0].exp_ratio, None);
    }

    #[test]
    fn ratio_grid() {
        let r = RatioRange::new(1.0, 2.0, 0.5);
        assert_eq!(r.values().collect::<Vec<_>>(), vec![1.0, 1.5, 2.0]);
        assert_eq!(r.index_of(1.5), Some(1));
        assert_eq!(r.index_of(1.25), None);
        assert_eq!(r.index_of(2.5), None);
    }

    #[test]
    fn toy_cardinality() {
        let s = SearchSpace {
            blocks: vec![BlockSpec {
                name: "Conv-0".into(),
                kind: BlockKind::PlainConv,
                width: IntRange::new(16, 32, 8),
                depth: IntRange::new(1, 2, 1),
                exp_ratio: None,
                stride: 2,
            }],
            resolutions: vec![192, 224, 256, 288],
        };
        s.validate().unwrap();
        assert_eq!(s.cardinality(), BigUint::from(24u32));
    }

    #[test]
    fn rejects_malformed_spaces() {
        let mut s = default_space();
        s.blocks[2].stride = 3;
        assert!(s.validate().is_err());

        let mut s = default_space();
        s.blocks.swap(0, 1);
        assert!(s.validate().is_err());

        let mut s = default_space();
        s.blocks[4].width = IntRange::new(20, 60, 4);
        assert!(s.validate().is_err());

        let mut s = default_space();
        s.blocks[3].depth = IntRange::new(6, 2, 1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = default_space();
        assert_eq!(SearchSpace::from_json(&s.to_json()).unwrap(), s);
        assert!(SearchSpace::from_json(r#"{"blocks":[],"resolutions":[1],"x":1}"#).is_err());
    }
}
