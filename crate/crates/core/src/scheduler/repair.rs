//! Capacity repair: pick one split option per layer so resident CIM weights
//! fit, keeping the summed objective low. This is a multiple-choice knapsack;
//! the solver is a convex-hull greedy followed by single and pairwise
//! exchange moves, and is deterministic.

/// Split options of one layer: resident bits and objective value per option.
/// Option 0 keeps the layer off CIM and holds no bits.
pub(crate) struct Menu {
    pub bits: Vec<u64>,
    pub value: Vec<f64>,
    /// Option indices by bits ascending (ties by index).
    by_bits: Vec<usize>,
    /// `best_upto[p]`: cheapest option among `by_bits[..=p]`, fewest bits on ties.
    best_upto: Vec<usize>,
    /// Lower convex hull of (bits, value), bits ascending, starting at option 0.
    hull: Vec<usize>,
}

impl Menu {
    pub fn new(bits: Vec<u64>, value: Vec<f64>) -> Self {
        debug_assert_eq!(bits[0], 0);
        let mut by_bits: Vec<usize> = (0..bits.len()).collect();
        by_bits.sort_by_key(|&k| (bits[k], k));
        let mut best_upto = Vec::with_capacity(by_bits.len());
        let mut best = by_bits[0];
        for &k in &by_bits {
            if value[k] < value[best] {
                best = k;
            }
            best_upto.push(best);
        }
        let mut hull: Vec<usize> = vec![0];
        for &k in &by_bits[1..] {
            let last = *hull.last().unwrap();
            if value[k] >= value[last] || bits[k] == bits[last] {
                continue;
            }
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let eff_ab = (value[a] - value[b]) / (bits[b] - bits[a]) as f64;
                let eff_bk = (value[b] - value[k]) / (bits[k] - bits[b]) as f64;
                if eff_bk >= eff_ab {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(k);
        }
        Menu {
            bits,
            value,
            by_bits,
            best_upto,
            hull,
        }
    }

    /// Cheapest option holding at most `room` bits.
    fn best_within(&self, room: u64) -> usize {
        let p = self.by_bits.partition_point(|&k| self.bits[k] <= room);
        self.best_upto[p.max(1) - 1]
    }
}

fn used(menus: &[Menu], pick: &[usize]) -> u64 {
    menus.iter().zip(pick).map(|(m, &k)| m.bits[k]).sum()
}

/// Takes hull steps in decreasing order of value saved per bit while they fit.
fn hull_greedy(menus: &[Menu], capacity: u64) -> Vec<usize> {
    let mut steps: Vec<(f64, usize, usize)> = Vec::new();
    for (i, m) in menus.iter().enumerate() {
        for s in 1..m.hull.len() {
            let (a, b) = (m.hull[s - 1], m.hull[s]);
            let eff = (m.value[a] - m.value[b]) / (m.bits[b] - m.bits[a]) as f64;
            steps.push((eff, i, s));
        }
    }
    steps.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut pos = vec![0usize; menus.len()];
    let mut frozen = vec![false; menus.len()];
    let mut room = capacity;
    for (_, i, s) in steps {
        if frozen[i] || pos[i] + 1 != s {
            continue;
        }
        let m = &menus[i];
        let extra = m.bits[m.hull[s]] - m.bits[m.hull[s - 1]];
        if extra <= room {
            room -= extra;
            pos[i] = s;
        } else {
            frozen[i] = true;
        }
    }
    pos.iter().zip(menus).map(|(&p, m)| m.hull[p]).collect()
}

/// Applies the best improving single or pairwise move until none is left.
fn local_search(menus: &[Menu], capacity: u64, mut pick: Vec<usize>) -> Vec<usize> {
    let n = menus.len();
    let mut room = capacity - used(menus, &pick);
    let max_moves = 16 * n + 16;
    for _ in 0..max_moves {
        // best single move
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (j, m) in menus.iter().enumerate() {
            let k = m.best_within(room + m.bits[pick[j]]);
            let gain = m.value[pick[j]] - m.value[k];
            if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, j, k, j, k));
            }
        }
        if best.is_none() {
            // best pair: shrink i along its hull, spend the room on j
            for (i, mi) in menus.iter().enumerate() {
                let cur = pick[i];
                for &a in mi.hull.iter().filter(|&&a| mi.bits[a] < mi.bits[cur]) {
                    let freed = mi.bits[cur] - mi.bits[a];
                    let loss = mi.value[a] - mi.value[cur];
                    for (j, mj) in menus.iter().enumerate() {
                        if j == i {
                            continue;
                        }
                        let k = mj.best_within(room + freed + mj.bits[pick[j]]);
                        let gain = mj.value[pick[j]] - mj.value[k] - loss;
                        if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                            best = Some((gain, i, a, j, k));
                        }
                    }
                }
            }
        }
        let Some((_, i, a, j, k)) = best else { break };
        pick[i] = a;
        pick[j] = k;
        room = capacity - used(menus, &pick);
    }
    pick
}

/// A pick per menu whose bits sum to at most `capacity`, or `None` when even
/// option 0 everywhere does not fit.
pub(crate) fn fit(menus: &[Menu], capacity: u64) -> Option<Vec<usize>> {
    if used(menus, &vec![0; menus.len()]) > capacity {
        return None;
    }
    Some(local_search(menus, capacity, hull_greedy(menus, capacity)))
}
