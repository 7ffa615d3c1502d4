//! Evolutionary multi-objective subnet search.
//!
//! A subnet is scored by an [`AccuracySurrogate`] and by the cost of its best
//! NPU/CIM schedule. The loop is an NSGA-II variant whose only randomness is a
//! seeded ChaCha stream; evaluation runs in parallel but results are merged in
//! index order, so a seed fixes the output.

mod evolve;
mod mix;
mod operators;
mod pareto;
mod surrogate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::costmodel::HardwareConfig;
use crate::netir::{materialize, NetirError, SearchSpace, SubnetChoice};
use crate::scheduler::{schedule_network, Objective, ScheduleError};

pub use evolve::{evolve, Evaluator, EvolutionParams};
pub use mix::{block_mix_report, write_mix_csv, BlockMix};
pub use operators::{crossover, crossover_with, mutate, mutate_with};
pub use pareto::{crowding_distance, dominates, hypervolume, nondominated_sort, pareto_front};
pub use surrogate::{AccuracySurrogate, LookupTable, Synthetic};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Netir(#[from] NetirError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("no accuracy recorded for choice {0}")]
    MissingAccuracy(String),
    #[error("the constraint excludes even the smallest subnet")]
    EmptyFeasibleSet,
    #[error("bad hypervolume reference: {0}")]
    BadReference(String),
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("invalid accuracy table: {0}")]
    InvalidAccuracy(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// What the search trades accuracy against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchObjective {
    Latency,
    Energy,
    /// Accuracy, latency and energy together; schedules minimize latency.
    Joint,
}

impl SearchObjective {
    pub fn schedule_objective(self) -> Objective {
        match self {
            SearchObjective::Energy => Objective::Energy,
            SearchObjective::Latency | SearchObjective::Joint => Objective::Latency,
        }
    }
}

impl fmt::Display for SearchObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchObjective::Latency => "latency",
            SearchObjective::Energy => "energy",
            SearchObjective::Joint => "joint",
        })
    }
}

impl FromStr for SearchObjective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "latency" => Ok(SearchObjective::Latency),
            "energy" => Ok(SearchObjective::Energy),
            "joint" => Ok(SearchObjective::Joint),
            _ => Err(format!(
                "unknown objective `{s}` (expected latency, energy or joint)"
            )),
        }
    }
}

/// Upper bound on latency (s) or energy (nJ) of an admissible subnet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    None,
    MaxLatency(f64),
    MaxEnergy(f64),
}

impl Constraint {
    pub fn admits(&self, e: &Evaluation) -> bool {
        match *self {
            Constraint::None => true,
            Constraint::MaxLatency(t) => e.latency <= t,
            Constraint::MaxEnergy(t) => e.energy <= t,
        }
    }
}

/// Score of one subnet under its best schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Seconds.
    pub latency: f64,
    /// Nanojoules.
    pub energy: f64,
    pub schedule_digest: String,
}

impl Evaluation {
    /// Minimization vector used for ranking.
    pub fn objectives(&self, objective: SearchObjective) -> Vec<f64> {
        match objective {
            SearchObjective::Latency => vec![-self.accuracy, self.latency],
            SearchObjective::Energy => vec![-self.accuracy, self.energy],
            SearchObjective::Joint => vec![-self.accuracy, self.latency, self.energy],
        }
    }

    /// Cost axis of the two-objective front; latency for joint runs.
    pub fn cost(&self, objective: SearchObjective) -> f64 {
        match objective {
            SearchObjective::Energy => self.energy,
            SearchObjective::Latency | SearchObjective::Joint => self.latency,
        }
    }
}

/// Materializes, schedules and scores one choice. Not memoized.
pub fn evaluate(
    choice: &SubnetChoice,
    space: &SearchSpace,
    hw: &HardwareConfig,
    surrogate: &dyn AccuracySurrogate,
    objective: SearchObjective,
) -> Result<Evaluation, SearchError> {
    let network = materialize(space, choice)?;
    let accuracy = surrogate.evaluate(choice, &network)?;
    let (schedule, report) = schedule_network(&network, hw, objective.schedule_objective())?;
    Ok(Evaluation {
        accuracy,
        latency: report.total_latency,
        energy: report.total_energy,
        schedule_digest: schedule.digest(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub choice: SubnetChoice,
    #[serde(flatten)]
    pub eval: Evaluation,
}

/// Nondominated subnets, ordered by cost ascending then accuracy descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub objective: SearchObjective,
    pub points: Vec<FrontPoint>,
}

impl ParetoFront {
    /// Filters `candidates` down to their nondominated set under `objective`.
    pub fn from_candidates(objective: SearchObjective, candidates: Vec<FrontPoint>) -> Self {
        let mut keep: Vec<usize> = match objective {
            SearchObjective::Joint => {
                let objs: Vec<Vec<f64>> = candidates
                    .iter()
                    .map(|p| p.eval.objectives(objective))
                    .collect();
                nondominated_sort(&objs)
                    .into_iter()
                    .next()
                    .unwrap_or_default()
            }
            _ => {
                let pts: Vec<(f64, f64)> = candidates
                    .iter()
                    .map(|p| (p.eval.accuracy, p.eval.cost(objective)))
                    .collect();
                pareto_front(&pts)
            }
        };
        keep.sort_by(|&a, &b| {
            let (x, y) = (&candidates[a].eval, &candidates[b].eval);
            x.cost(objective)
                .total_cmp(&y.cost(objective))
                .then(y.accuracy.total_cmp(&x.accuracy))
                .then(candidates[a].choice.key().cmp(&candidates[b].choice.key()))
        });
        let mut slots: Vec<Option<FrontPoint>> = candidates.into_iter().map(Some).collect();
        let points = keep.into_iter().filter_map(|i| slots[i].take()).collect();
        ParetoFront { objective, points }
    }

    /// `(accuracy, cost)` pairs of the front.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.eval.accuracy, p.eval.cost(self.objective)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("front serializes")
    }

    /// `acc,latency_s,energy_nj,choice_json,schedule_digest` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "acc",
            "latency_s",
            "energy_nj",
            "choice_json",
            "schedule_digest",
        ])
        .expect("in-memory write");
        for p in &self.points {
            w.write_record([
                p.eval.accuracy.to_string(),
                p.eval.latency.to_string(),
                p.eval.energy.to_string(),
                p.choice.key(),
                p.eval.schedule_digest.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}
