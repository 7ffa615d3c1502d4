use std::collections::{BTreeMap, HashSet};
use std::num::NonZeroUsize;

use lru::LruCache;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::{crossover_with, mutate_with};
use super::pareto::{crowding_distance, nondominated_sort};
use super::{
    evaluate, AccuracySurrogate, Constraint, Evaluation, FrontPoint, ParetoFront, SearchError,
    SearchObjective,
};
use crate::costmodel::HardwareConfig;
use crate::netir::{largest_subnet, sample_with, smallest_subnet, SearchSpace, SubnetChoice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub population: usize,
    pub generations: usize,
    /// Per-field mutation probability.
    pub mutation_rate: f64,
    /// Probability that a child is a crossover rather than a copy of one parent.
    pub crossover_rate: f64,
    pub objective: SearchObjective,
    pub constraint: Constraint,
    pub seed: u64,
    /// Memoized evaluations kept across generations.
    pub cache_capacity: usize,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            population: 256,
            generations: 60,
            mutation_rate: 0.1,
            crossover_rate: 0.9,
            objective: SearchObjective::Latency,
            constraint: Constraint::None,
            seed: 0,
            cache_capacity: 100_000,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidParams(m.into()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("crossover_rate must lie in [0, 1]");
        }
        if self.cache_capacity == 0 {
            return bad("cache_capacity must be positive");
        }
        match self.constraint {
            Constraint::MaxLatency(t) | Constraint::MaxEnergy(t) if t.is_nan() => {
                bad("constraint bound is NaN")
            }
            _ => Ok(()),
        }
    }
}

/// Memoizing scorer. Misses are evaluated in parallel and stored in input order.
pub struct Evaluator<'a> {
    space: &'a SearchSpace,
    hw: &'a HardwareConfig,
    surrogate: &'a dyn AccuracySurrogate,
    objective: SearchObjective,
    cache: LruCache<String, Evaluation>,
    pub hits: u64,
    pub misses: u64,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        space: &'a SearchSpace,
        hw: &'a HardwareConfig,
        surrogate: &'a dyn AccuracySurrogate,
        objective: SearchObjective,
        cache_capacity: usize,
    ) -> Self {
        let cap = NonZeroUsize::new(cache_capacity.max(1)).expect("nonzero");
        Evaluator {
            space,
            hw,
            surrogate,
            objective,
            cache: LruCache::new(cap),
            hits: 0,
            misses: 0,
        }
    }

    pub fn evaluate_batch(
        &mut self,
        choices: &[SubnetChoice],
    ) -> Result<Vec<Evaluation>, SearchError> {
        let keys: Vec<String> = choices.iter().map(SubnetChoice::key).collect();
        let mut found: Vec<Option<Evaluation>> = Vec::with_capacity(choices.len());
        let mut pending: Vec<usize> = Vec::new();
        let mut queued = HashSet::new();
        for (i, k) in keys.iter().enumerate() {
            match self.cache.get(k) {
                Some(e) => {
                    self.hits += 1;
                    found.push(Some(e.clone()));
                }
                None => {
                    found.push(None);
                    if queued.insert(k.as_str()) {
                        pending.push(i);
                    }
                }
            }
        }
        let (space, hw, sur, obj) = (self.space, self.hw, self.surrogate, self.objective);
        let fresh: Vec<Result<Evaluation, SearchError>> = pending
            .par_iter()
            .map(|&i| evaluate(&choices[i], space, hw, sur, obj))
            .collect();
        let mut by_key = BTreeMap::new();
        for (&i, r) in pending.iter().zip(fresh) {
            let e = r?;
            self.misses += 1;
            self.cache.put(keys[i].clone(), e.clone());
            by_key.insert(keys[i].as_str(), e);
        }
        Ok(found
            .into_iter()
            .zip(&keys)
            .map(|(f, k)| f.unwrap_or_else(|| by_key[k.as_str()].clone()))
            .collect())
    }
}

#[derive(Clone)]
struct Member {
    choice: SubnetChoice,
    key: String,
    eval: Evaluation,
}

/// Rank and crowding distance of every member.
fn rank_and_crowd(members: &[Member], objective: SearchObjective) -> (Vec<usize>, Vec<f64>) {
    let objs: Vec<Vec<f64>> = members
        .iter()
        .map(|m| m.eval.objectives(objective))
        .collect();
    let mut rank = vec![0; members.len()];
    let mut crowd = vec![0.0; members.len()];
    for (r, front) in nondominated_sort(&objs).iter().enumerate() {
        for (&i, d) in front.iter().zip(crowding_distance(&objs, front)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Keeps the best `n` by rank, then crowding distance, then choice key.
fn select(mut members: Vec<Member>, n: usize, objective: SearchObjective) -> Vec<Member> {
    if members.len() <= n {
        return members;
    }
    let (rank, crowd) = rank_and_crowd(&members, objective);
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| {
        rank[a]
            .cmp(&rank[b])
            .then(crowd[b].total_cmp(&crowd[a]))
            .then(members[a].key.cmp(&members[b].key))
    });
    order.truncate(n);
    order.sort_unstable();
    let keep: HashSet<usize> = order.into_iter().collect();
    let mut i = 0;
    members.retain(|_| {
        i += 1;
        keep.contains(&(i - 1))
    });
    members
}

fn tournament<'m, R: Rng>(
    members: &'m [Member],
    rank: &[usize],
    crowd: &[f64],
    rng: &mut R,
) -> &'m Member {
    let a = rng.gen_range(0..members.len());
    let b = rng.gen_range(0..members.len());
    let better = match rank[a].cmp(&rank[b]) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if crowd[b] > crowd[a] {
                b
            } else {
                a
            }
        }
    };
    &members[better]
}

/// Runs the search and returns the nondominated set of every feasible subnet
/// it evaluated.
///
/// The initial population holds the smallest and largest subnets plus uniform
/// samples. Children are deduplicated against everything already seen, and
/// infeasible ones are discarded before survivor selection.
pub fn evolve(
    space: &SearchSpace,
    hw: &HardwareConfig,
    surrogate: &dyn AccuracySurrogate,
    params: &EvolutionParams,
) -> Result<ParetoFront, SearchError> {
    params.validate()?;
    space.validate()?;
    let obj = params.objective;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut ev = Evaluator::new(space, hw, surrogate, obj, params.cache_capacity);

    let smallest = smallest_subnet(space);
    let first = ev.evaluate_batch(std::slice::from_ref(&smallest))?;
    if !params.constraint.admits(&first[0]) {
        return Err(SearchError::EmptyFeasibleSet);
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut init = Vec::new();
    for c in [smallest, largest_subnet(space)] {
        if seen.insert(c.key()) {
            init.push(c);
        }
    }
    let mut attempts = 0;
    while init.len() < params.population && attempts < params.population * 50 {
        attempts += 1;
        let c = sample_with(space, &mut rng);
        if seen.insert(c.key()) {
            init.push(c);
        }
    }

    let mut archive: BTreeMap<String, Member> = BTreeMap::new();
    let absorb = |choices: Vec<SubnetChoice>,
                  ev: &mut Evaluator,
                  archive: &mut BTreeMap<String, Member>|
     -> Result<Vec<Member>, SearchError> {
        let evals = ev.evaluate_batch(&choices)?;
        let mut kept = Vec::new();
        for (choice, eval) in choices.into_iter().zip(evals) {
            if params.constraint.admits(&eval) {
                let m = Member {
                    key: choice.key(),
                    choice,
                    eval,
                };
                archive.insert(m.key.clone(), m.clone());
                kept.push(m);
            }
        }
        Ok(kept)
    };

    let mut pop = absorb(init, &mut ev, &mut archive)?;
    for _ in 0..params.generations {
        let (rank, crowd) = rank_and_crowd(&pop, obj);
        let mut children = Vec::new();
        let mut tries = 0;
        while children.len() < params.population && tries < params.population * 20 {
            tries += 1;
            let p1 = tournament(&pop, &rank, &crowd, &mut rng);
            let p2 = tournament(&pop, &rank, &crowd, &mut rng);
            let base = if rng.gen_bool(params.crossover_rate) {
                crossover_with(&p1.choice, &p2.choice, space, &mut rng)
            } else {
                p1.choice.clone()
            };
            let child = mutate_with(&base, space, params.mutation_rate, &mut rng);
            if seen.insert(child.key()) {
                children.push(child);
            }
        }
        if children.is_empty() {
            break;
        }
        let mut merged = pop;
        merged.extend(absorb(children, &mut ev, &mut archive)?);
        pop = select(merged, params.population, obj);
    }

    let candidates = archive
        .into_values()
        .map(|m| FrontPoint {
            choice: m.choice,
            eval: m.eval,
        })
        .collect();
    Ok(ParetoFront::from_candidates(obj, candidates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netir::default_space;
    use crate::search::Synthetic;

    fn small_params(seed: u64) -> EvolutionParams {
        EvolutionParams {
            population: 12,
            generations: 3,
            seed,
            ..EvolutionParams::default()
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (s, hw, sur) = (
            default_space(),
            HardwareConfig::sample(),
            Synthetic::default(),
        );
        let a = evolve(&s, &hw, &sur, &small_params(3)).unwrap();
        let b = evolve(&s, &hw, &sur, &small_params(3)).unwrap();
        assert_eq!(a, b);
        assert!(!a.points.is_empty());
    }

    #[test]
    fn impossible_constraint() {
        let (s, hw, sur) = (
            default_space(),
            HardwareConfig::sample(),
            Synthetic::default(),
        );
        let p = EvolutionParams {
            constraint: Constraint::MaxLatency(1e-12),
            ..small_params(0)
        };
        assert!(matches!(
            evolve(&s, &hw, &sur, &p),
            Err(SearchError::EmptyFeasibleSet)
        ));
    }

    #[test]
    fn cache_hits_on_repeat() {
        let (s, hw, sur) = (
            default_space(),
            HardwareConfig::sample(),
            Synthetic::default(),
        );
        let mut ev = Evaluator::new(&s, &hw, &sur, SearchObjective::Latency, 4);
        let c = smallest_subnet(&s);
        let a = ev.evaluate_batch(&[c.clone(), c.clone()]).unwrap();
        let b = ev.evaluate_batch(&[c]).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!((ev.misses, ev.hits), (1, 1));
    }

    #[test]
    fn bad_params() {
        let mut p = small_params(0);
        p.population = 1;
        assert!(p.validate().is_err());
        p.population = 4;
        p.mutation_rate = 1.5;
        assert!(p.validate().is_err());
    }
}
