use serde::{Deserialize, Serialize};

use super::{ParetoFront, SearchError};
use crate::netir::{materialize, Network, SearchSpace, UnitKind};

/// Transformer encoder layers versus inverted-residual blocks of one front point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMix {
    pub index: usize,
    pub accuracy: f64,
    pub cost: f64,
    pub n_vit_layers: usize,
    pub n_irb_layers: usize,
    /// `n_vit / n_irb`; 0 without ViT layers, infinite with ViT but no IRB.
    pub ratio: f64,
}

impl BlockMix {
    pub fn of_network(net: &Network) -> (usize, usize, f64) {
        let vit = net.count_units(UnitKind::Vit);
        let irb = net.count_units(UnitKind::Irb);
        let ratio = match (vit, irb) {
            (0, _) => 0.0,
            (_, 0) => f64::INFINITY,
            _ => vit as f64 / irb as f64,
        };
        (vit, irb, ratio)
    }
}

pub fn block_mix_report(
    front: &ParetoFront,
    space: &SearchSpace,
) -> Result<Vec<BlockMix>, SearchError> {
    front
        .points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let (n_vit_layers, n_irb_layers, ratio) =
                BlockMix::of_network(&materialize(space, &p.choice)?);
            Ok(BlockMix {
                index,
                accuracy: p.eval.accuracy,
                cost: p.eval.cost(front.objective),
                n_vit_layers,
                n_irb_layers,
                ratio,
            })
        })
        .collect()
}

pub fn write_mix_csv(rows: &[BlockMix]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "index",
            "accuracy",
            "cost",
            "n_vit_layers",
            "n_irb_layers",
            "ratio",
        ])
        .expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
