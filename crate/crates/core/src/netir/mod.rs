//! Network IR and the hybrid CNN/ViT search space.
//!
//! A [`SearchSpace`] is an ordered list of searchable blocks; a [`SubnetChoice`]
//! picks one grid value per block dimension plus an input resolution and
//! [`materialize`]s into a [`Network`] of [`LayerSpec`]s. Workload counters
//! assume batch 1 and 8-bit tensors.

mod choice;
mod layer;
mod network;
mod space;
mod workload;

pub use choice::{
    enumerate, largest_subnet, sample_random, sample_with, smallest_subnet, validate, BlockChoice,
    Choices, SubnetChoice, Violation,
};
pub use layer::{LayerError, LayerKind, LayerSpec, HEAD_DIM, NUM_CLASSES};
pub use network::{materialize, Network, Unit, UnitKind, INPUT_CHANNELS};
pub use space::{
    default_space, space_cardinality, BlockKind, BlockSpec, IntRange, RatioRange, SearchSpace,
};
pub use workload::{count_macs, count_params, count_traffic, Traffic};

#[derive(Debug, thiserror::Error)]
pub enum NetirError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid subnet choice: {}", format_violations(.0))]
    InvalidChoice(Vec<Violation>),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
