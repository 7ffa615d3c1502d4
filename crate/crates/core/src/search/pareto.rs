use std::cmp::Ordering;

use super::SearchError;

/// Indices of the points not dominated in (accuracy up, cost down).
///
/// A point is dominated when another is at least as good on both axes and
/// strictly better on one; exact duplicates therefore survive together.
/// Returned indices are sorted by cost ascending, then accuracy descending,
/// then index. O(n log n).
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.1.total_cmp(&pb.1)
            .then(pb.0.total_cmp(&pa.0))
            .then(a.cmp(&b))
    });
    let mut out = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        // one group of identical cost; its leaders share the top accuracy
        let cost = points[order[i]].1;
        let mut j = i;
        while j < order.len() && points[order[j]].1 == cost {
            j += 1;
        }
        let top = points[order[i]].0;
        if top > best_acc {
            out.extend(order[i..j].iter().copied().filter(|&k| points[k].0 == top));
            best_acc = top;
        }
        i = j;
    }
    out
}

/// Area dominated by `front` and bounded by `reference = (accuracy, cost)`,
/// the worst corner. Points that are dominated inside `front` are ignored.
pub fn hypervolume(front: &[(f64, f64)], reference: (f64, f64)) -> Result<f64, SearchError> {
    if !(reference.0.is_finite() && reference.1.is_finite()) {
        return Err(SearchError::BadReference("non-finite reference".into()));
    }
    for &(acc, cost) in front {
        if !(acc.is_finite() && cost.is_finite()) {
            return Err(SearchError::BadReference("non-finite point".into()));
        }
        if acc < reference.0 || cost > reference.1 {
            return Err(SearchError::BadReference(format!(
                "point ({acc}, {cost}) lies outside reference ({}, {})",
                reference.0, reference.1
            )));
        }
    }
    let idx = pareto_front(front);
    let mut area = 0.0;
    for (n, &i) in idx.iter().enumerate() {
        let (acc, cost) = front[i];
        let next = idx.get(n + 1).map_or(reference.1, |&j| front[j].1);
        area += (next - cost) * (acc - reference.0);
    }
    Ok(area)
}

/// `a` dominates `b` for minimization vectors.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Greater => return false,
            Ordering::Less => strictly = true,
            Ordering::Equal => {}
        }
    }
    strictly
}

/// Fast nondominated sort over minimization vectors; returns fronts of indices,
/// best first, each in ascending index order.
pub fn nondominated_sort(objs: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            if dominates(&objs[p], &objs[q]) {
                dominated_by_me[p].push(q);
            } else if dominates(&objs[q], &objs[p]) {
                count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&p| count[p] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                count[q] -= 1;
                if count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front (same order as `front`).
/// Boundary points get infinity.
#[allow(clippy::needless_range_loop)]
pub fn crowding_distance(objs: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let mut dist = vec![0.0; front.len()];
    if front.len() <= 2 {
        return vec![f64::INFINITY; front.len()];
    }
    let m = objs[front[0]].len();
    for k in 0..m {
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            objs[front[a]][k]
                .total_cmp(&objs[front[b]][k])
                .then(front[a].cmp(&front[b]))
        });
        let lo = objs[front[order[0]]][k];
        let hi = objs[front[*order.last().unwrap()]][k];
        dist[order[0]] = f64::INFINITY;
        dist[*order.last().unwrap()] = f64::INFINITY;
        if hi > lo {
            for w in 1..order.len() - 1 {
                let gap = objs[front[order[w + 1]]][k] - objs[front[order[w - 1]]][k];
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let p = [(0.7, 2.0)];
        assert_eq!(pareto_front(&p), vec![0]);
        assert_eq!(
            hypervolume(&p, (0.5, 3.0)).unwrap(),
            (3.0 - 2.0) * (0.7 - 0.5)
        );
    }

    #[test]
    fn mutually_nondominated_pair() {
        let p = [(0.6, 1.0), (0.8, 2.0)];
        assert_eq!(pareto_front(&p), vec![0, 1]);
        let hv = hypervolume(&p, (0.0, 3.0)).unwrap();
        assert!((hv - (1.0 * 0.6 + 1.0 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn dominated_and_duplicate_points() {
        let p = [(0.6, 1.0), (0.5, 1.5), (0.6, 1.0), (0.9, 1.0)];
        assert_eq!(pareto_front(&p), vec![3]);
        let q = [(0.6, 1.0), (0.6, 1.0)];
        assert_eq!(pareto_front(&q), vec![0, 1]);
    }

    #[test]
    fn bad_reference() {
        let p = [(0.6, 1.0)];
        assert!(hypervolume(&p, (0.7, 3.0)).is_err());
        assert!(hypervolume(&p, (0.0, 0.5)).is_err());
        assert!(hypervolume(&p, (0.0, f64::NAN)).is_err());
    }

    #[test]
    fn sort_ranks() {
        let objs = vec![
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![0.5, 3.0],
            vec![3.0, 3.0],
        ];
        assert_eq!(nondominated_sort(&objs), vec![vec![0, 2], vec![1], vec![3]]);
        let d = crowding_distance(&objs, &[0, 1, 2, 3]);
        assert!(d[0].is_infinite() || d[2].is_infinite());
    }
}
