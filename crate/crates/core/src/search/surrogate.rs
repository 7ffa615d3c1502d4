use std::collections::HashMap;
use std::io::Read;

use super::SearchError;
use crate::netir::{Network, SubnetChoice, UnitKind};

/// Source of the accuracy signal used to rank subnets.
///
/// Implementations must be deterministic; they are called from several
/// worker threads at once.
pub trait AccuracySurrogate: Send + Sync {
    /// Accuracy proxy in `[0, 1]`. `network` is the materialized `choice`.
    fn evaluate(&self, choice: &SubnetChoice, network: &Network) -> Result<f64, SearchError>;

    fn name(&self) -> String;
}

/// Smooth stand-in for a trained supernet: accuracy grows with log-MACs, depth,
/// transformer depth and resolution, each with diminishing returns. It is not
/// an accuracy predictor; it only gives the search a plausible monotone
/// trade-off to work against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synthetic {
    /// MAC count at which the compute term reaches about half its range.
    pub macs_scale: f64,
}

impl Default for Synthetic {
    fn default() -> Self {
        Synthetic { macs_scale: 1e6 }
    }
}

impl Synthetic {
    pub fn new(macs_scale: f64) -> Self {
        Synthetic { macs_scale }
    }

    pub fn score(&self, macs: u64, units: usize, vit_units: usize, resolution: u32) -> f64 {
        let compute = 1.0 - (-0.6 * (1.0 + macs as f64 / self.macs_scale).ln()).exp();
        let depth = 1.0 - (-(units as f64) / 12.0).exp();
        let vit = 1.0 - (-(vit_units as f64) / 4.0).exp();
        let res = 1.0 - (-(resolution as f64) / 256.0).exp();
        0.80 * compute + 0.05 * depth + 0.02 * vit + 0.03 * res
    }
}

impl AccuracySurrogate for Synthetic {
    fn evaluate(&self, choice: &SubnetChoice, network: &Network) -> Result<f64, SearchError> {
        Ok(self.score(
            network.total_macs(),
            network.units.len(),
            network.count_units(UnitKind::Vit),
            choice.resolution,
        ))
    }

    fn name(&self) -> String {
        format!("synthetic(macs_scale={})", self.macs_scale)
    }
}

/// Accuracies keyed by [`SubnetChoice::digest`], e.g. measured on a trained
/// supernet. Unknown choices are an error, not a guess.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LookupTable {
    pub entries: HashMap<String, f64>,
}

impl LookupTable {
    /// Reads a `choice_key,accuracy` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, SearchError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| SearchError::Parse(e.to_string()))?
            .clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        if names != ["choice_key", "accuracy"] {
            return Err(SearchError::Parse(format!(
                "expected header `choice_key,accuracy`, found `{}`",
                names.join(",")
            )));
        }
        let mut entries = HashMap::new();
        for (i, rec) in rdr.deserialize::<(String, f64)>().enumerate() {
            let (key, acc) = rec.map_err(|e| SearchError::Parse(format!("row {}: {e}", i + 2)))?;
            if !(0.0..=1.0).contains(&acc) {
                return Err(SearchError::InvalidAccuracy(format!(
                    "row {}: accuracy {acc} outside [0, 1]",
                    i + 2
                )));
            }
            entries.insert(key, acc);
        }
        Ok(LookupTable { entries })
    }
}

impl AccuracySurrogate for LookupTable {
    fn evaluate(&self, choice: &SubnetChoice, _network: &Network) -> Result<f64, SearchError> {
        let key = choice.digest();
        self.entries
            .get(&key)
            .copied()
            .ok_or(SearchError::MissingAccuracy(key))
    }

    fn name(&self) -> String {
        format!("lookup({} entries)", self.entries.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netir::{default_space, largest_subnet, materialize, smallest_subnet};

    #[test]
    fn synthetic_is_bounded_and_ordered() {
        let s = default_space();
        let sur = Synthetic::default();
        let (a, b) = (smallest_subnet(&s), largest_subnet(&s));
        let lo = sur.evaluate(&a, &materialize(&s, &a).unwrap()).unwrap();
        let hi = sur.evaluate(&b, &materialize(&s, &b).unwrap()).unwrap();
        assert!(0.0 < lo && lo < hi && hi < 1.0, "{lo} {hi}");
    }

    #[test]
    fn lookup_by_digest() {
        let s = default_space();
        let c = smallest_subnet(&s);
        let net = materialize(&s, &c).unwrap();
        let csv = format!("choice_key,accuracy\n{},0.71\n", c.digest());
        let t = LookupTable::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.evaluate(&c, &net).unwrap(), 0.71);
        let other = largest_subnet(&s);
        assert!(matches!(
            t.evaluate(&other, &net),
            Err(SearchError::MissingAccuracy(_))
        ));
        assert!(LookupTable::from_csv("key,acc\n".as_bytes()).is_err());
        assert!(LookupTable::from_csv("choice_key,accuracy\nabc,1.5\n".as_bytes()).is_err());
    }
}
