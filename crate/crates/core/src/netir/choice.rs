use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::space::{BlockSpec, SearchSpace};
use super::NetirError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockChoice {
    pub block: String,
    pub width: u32,
    pub depth: u32,
    pub exp_ratio: Option<f64>,
}

/// One point of a [`SearchSpace`]. The canonical JSON form doubles as the
/// deduplication key during search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnetChoice {
    pub resolution: u32,
    pub blocks: Vec<BlockChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// `None` for choice-wide fields (resolution, block count).
    pub block: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.block {
            Some(b) => write!(f, "{b}/{}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

impl SubnetChoice {
    /// Compact canonical serialization.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("choice serializes")
    }

    /// SHA-256 of [`SubnetChoice::key`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.key().as_bytes()))
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("choice serializes")
    }

    pub fn from_text(text: &str) -> Result<Self, NetirError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn block(&self, name: &str) -> Option<&BlockChoice> {
        self.blocks.iter().find(|b| b.block == name)
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut BlockChoice> {
        self.blocks.iter_mut().find(|b| b.block == name)
    }
}

fn pick(spec: &BlockSpec, wi: usize, di: usize, ei: usize) -> BlockChoice {
    BlockChoice {
        block: spec.name.clone(),
        width: spec.width.value(wi),
        depth: spec.depth.value(di),
        exp_ratio: spec.exp_ratio.map(|r| r.value(ei)),
    }
}

pub fn smallest_subnet(space: &SearchSpace) -> SubnetChoice {
    SubnetChoice {
        resolution: space.resolutions[0],
        blocks: space.blocks.iter().map(|b| pick(b, 0, 0, 0)).collect(),
    }
}

pub fn largest_subnet(space: &SearchSpace) -> SubnetChoice {
    SubnetChoice {
        resolution: *space.resolutions.last().expect("nonempty resolutions"),
        blocks: space
            .blocks
            .iter()
            .map(|b| {
                let e = b.exp_ratio.map_or(0, |r| r.len() - 1);
                pick(b, b.width.len() - 1, b.depth.len() - 1, e)
            })
            .collect(),
    }
}

/// Uniform, independent choice per dimension.
pub fn sample_with<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> SubnetChoice {
    let blocks = space
        .blocks
        .iter()
        .map(|b| {
            let wi = rng.gen_range(0..b.width.len());
            let di = rng.gen_range(0..b.depth.len());
            let ei = b.exp_ratio.map_or(0, |r| rng.gen_range(0..r.len()));
            pick(b, wi, di, ei)
        })
        .collect();
    let resolution = space.resolutions[rng.gen_range(0..space.resolutions.len())];
    SubnetChoice { resolution, blocks }
}

pub fn sample_random(space: &SearchSpace, seed: u64) -> SubnetChoice {
    sample_with(space, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn validate(space: &SearchSpace, choice: &SubnetChoice) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |block: Option<&str>, field: &str, message: String| {
        out.push(Violation {
            block: block.map(str::to_string),
            field: field.to_string(),
            message,
        })
    };
    if !space.resolutions.contains(&choice.resolution) {
        push(
            None,
            "resolution",
            format!("{} not in {:?}", choice.resolution, space.resolutions),
        );
    }
    if choice.blocks.len() != space.blocks.len() {
        push(
            None,
            "blocks",
            format!(
                "expected {} blocks, found {}",
                space.blocks.len(),
                choice.blocks.len()
            ),
        );
        return out;
    }
    for (spec, c) in space.blocks.iter().zip(&choice.blocks) {
        let name = Some(spec.name.as_str());
        if c.block != spec.name {
            push(
                name,
                "block",
                format!("found block `{}` in this position", c.block),
            );
            continue;
        }
        if spec.width.index_of(c.width).is_none() {
            push(
                name,
                "width",
                format!(
                    "{} not in {}..={} step {}",
                    c.width, spec.width.min, spec.width.max, spec.width.step
                ),
            );
        }
        if spec.depth.index_of(c.depth).is_none() {
            push(
                name,
                "depth",
                format!("{} not in {}..={}", c.depth, spec.depth.min, spec.depth.max),
            );
        }
        match (spec.exp_ratio, c.exp_ratio) {
            (None, None) => {}
            (None, Some(v)) => push(name, "exp_ratio", format!("{v} given but not searchable")),
            (Some(_), None) => push(name, "exp_ratio", "missing".to_string()),
            (Some(r), Some(v)) if r.index_of(v).is_none() => push(
                name,
                "exp_ratio",
                format!("{v} not in {}..={} step {}", r.min, r.max, r.step),
            ),
            _ => {}
        }
    }
    out
}

/// Every choice of a space in odometer order (resolution slowest). Only
/// sensible for small spaces; see [`SearchSpace::cardinality`].
pub struct Choices<'a> {
    space: &'a SearchSpace,
    // [resolution, (width, depth, exp) per block]
    index: Vec<usize>,
    radix: Vec<usize>,
    done: bool,
}

pub fn enumerate(space: &SearchSpace) -> Choices<'_> {
    let mut radix = vec![space.resolutions.len()];
    for b in &space.blocks {
        radix.push(b.width.len());
        radix.push(b.depth.len());
        radix.push(b.exp_ratio.map_or(1, |r| r.len()));
    }
    Choices {
        space,
        index: vec![0; radix.len()],
        radix,
        done: space.resolutions.is_empty(),
    }
}

impl Iterator for Choices<'_> {
    type Item = SubnetChoice;

    fn next(&mut self) -> Option<SubnetChoice> {
        if self.done {
            return None;
        }
        let choice = SubnetChoice {
            resolution: self.space.resolutions[self.index[0]],
            blocks: self
                .space
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let at = 1 + 3 * i;
                    pick(b, self.index[at], self.index[at + 1], self.index[at + 2])
                })
                .collect(),
        };
        // advance, last digit fastest
        let mut pos = self.index.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.index[pos] += 1;
            if self.index[pos] < self.radix[pos] {
                break;
            }
            self.index[pos] = 0;
        }
        Some(choice)
    }
}
