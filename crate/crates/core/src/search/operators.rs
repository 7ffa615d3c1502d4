use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netir::{SearchSpace, SubnetChoice};

fn step_index<R: Rng + ?Sized>(rng: &mut R, index: usize, len: usize) -> usize {
    if rng.gen_bool(0.5) {
        (index + 1).min(len - 1)
    } else {
        index.saturating_sub(1)
    }
}

/// Moves each field, independently with probability `rate`, one grid step up
/// or down (clamped at the range ends). `choice` must be valid in `space`.
pub fn mutate_with<R: Rng + ?Sized>(
    choice: &SubnetChoice,
    space: &SearchSpace,
    rate: f64,
    rng: &mut R,
) -> SubnetChoice {
    let mut out = choice.clone();
    if rate <= 0.0 {
        return out;
    }
    let rate = rate.min(1.0);
    for (spec, c) in space.blocks.iter().zip(out.blocks.iter_mut()) {
        if rng.gen_bool(rate) {
            let i = spec.width.index_of(c.width).expect("valid width");
            c.width = spec.width.value(step_index(rng, i, spec.width.len()));
        }
        if rng.gen_bool(rate) {
            let i = spec.depth.index_of(c.depth).expect("valid depth");
            c.depth = spec.depth.value(step_index(rng, i, spec.depth.len()));
        }
        if let (Some(r), Some(v)) = (spec.exp_ratio, c.exp_ratio) {
            if rng.gen_bool(rate) {
                let i = r.index_of(v).expect("valid ratio");
                c.exp_ratio = Some(r.value(step_index(rng, i, r.len())));
            }
        }
    }
    if rng.gen_bool(rate) {
        let rs = &space.resolutions;
        let i = rs
            .iter()
            .position(|&r| r == out.resolution)
            .expect("valid resolution");
        out.resolution = rs[step_index(rng, i, rs.len())];
    }
    out
}

pub fn mutate(choice: &SubnetChoice, space: &SearchSpace, rate: f64, seed: u64) -> SubnetChoice {
    mutate_with(choice, space, rate, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Takes each block's fields, and the resolution, from `a` or `b` with equal
/// probability.
pub fn crossover_with<R: Rng + ?Sized>(
    a: &SubnetChoice,
    b: &SubnetChoice,
    _space: &SearchSpace,
    rng: &mut R,
) -> SubnetChoice {
    let blocks = a
        .blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| {
            if rng.gen_bool(0.5) {
                x.clone()
            } else {
                y.clone()
            }
        })
        .collect();
    let resolution = if rng.gen_bool(0.5) {
        a.resolution
    } else {
        b.resolution
    };
    SubnetChoice { resolution, blocks }
}

pub fn crossover(
    a: &SubnetChoice,
    b: &SubnetChoice,
    space: &SearchSpace,
    seed: u64,
) -> SubnetChoice {
    crossover_with(a, b, space, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netir::{default_space, largest_subnet, sample_random, smallest_subnet, validate};

    #[test]
    fn zero_rate_is_identity() {
        let s = default_space();
        let c = sample_random(&s, 1);
        assert_eq!(mutate(&c, &s, 0.0, 9), c);
    }

    #[test]
    fn self_crossover_is_identity() {
        let s = default_space();
        let c = sample_random(&s, 2);
        for seed in 0..20 {
            assert_eq!(crossover(&c, &c, &s, seed), c);
        }
    }

    #[test]
    fn crossover_mixes_parents() {
        let s = default_space();
        let (a, b) = (smallest_subnet(&s), largest_subnet(&s));
        let child = crossover(&a, &b, &s, 5);
        assert!(validate(&s, &child).is_empty());
        for (i, blk) in child.blocks.iter().enumerate() {
            assert!(*blk == a.blocks[i] || *blk == b.blocks[i]);
        }
    }

    #[test]
    fn full_rate_moves_at_most_one_step() {
        let s = default_space();
        let c = sample_random(&s, 4);
        let m = mutate(&c, &s, 1.0, 11);
        assert!(validate(&s, &m).is_empty());
        for ((spec, x), y) in s.blocks.iter().zip(&c.blocks).zip(&m.blocks) {
            let (i, j) = (
                spec.width.index_of(x.width).unwrap(),
                spec.width.index_of(y.width).unwrap(),
            );
            assert!(i.abs_diff(j) <= 1);
        }
    }
}
