//! Exhaustive optima for small instances, plus two classical baselines.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::metric::Metric;
use crate::objectives::{evaluate_hc, evaluate_la, HcTree, LinearArrangement};
use crate::seeded_rng;

pub const MAX_LA_ORACLE_N: usize = 10;
pub const MAX_HC_ORACLE_N: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance has {n} points; exhaustive search is limited to {limit}")]
    TooLarge { n: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<W> {
    pub value: f64,
    pub witness: W,
    /// Candidates scored.
    pub explored: u64,
}

fn tie_tolerance(m: &Metric) -> f64 {
    1e-12 * (m.total_weight() * (m.n() * m.n()) as f64).max(f64::MIN_POSITIVE)
}

/// Maximum linear arrangement over all orders with `order[0] < order[n-1]`
/// (the reversal of an order has the same value). The witness is the
/// lexicographically first optimal order.
pub fn brute_force_la(m: &Metric) -> Result<OracleResult<LinearArrangement>, OracleError> {
    let n = m.n();
    if n > MAX_LA_ORACLE_N {
        return Err(OracleError::TooLarge { n, limit: MAX_LA_ORACLE_N });
    }
    let tol = tie_tolerance(m);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut explored = 0u64;
    loop {
        if n < 2 || order[0] < order[n - 1] {
            explored += 1;
            let mut v = 0.0;
            for s in 0..n {
                let row = m.row(order[s]);
                for t in (s + 1)..n {
                    v += row[order[t]] * (t - s) as f64;
                }
            }
            if best.as_ref().is_none_or(|b| v > b.0 + tol) {
                best = Some((v, order.clone()));
            }
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    let (_, best_order) = best.expect("at least one order");
    let witness = LinearArrangement::from_order(&best_order).expect("permutation");
    let value = evaluate_la(m, &witness).expect("sizes match");
    Ok(OracleResult { value, witness, explored })
}

fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Mutable tree used while enumerating by leaf insertion. Leaves are nodes
/// `0..n`; internal nodes follow.
struct InsertionTree {
    left: Vec<usize>,
    right: Vec<usize>,
    parent: Vec<usize>,
    root: usize,
}

const NONE: usize = usize::MAX;

impl InsertionTree {
    fn to_tree(&self, n: usize) -> HcTree {
        fn build(t: &InsertionTree, n: usize, v: usize) -> HcTree {
            if v < n {
                HcTree::leaf(v)
            } else {
                HcTree::join(build(t, n, t.left[v]), build(t, n, t.right[v]))
            }
        }
        build(self, n, self.root).canonical()
    }

    /// `Σ_internal |mask| · W(left, right)` from per-mask weights.
    fn value(&self, n: usize, within: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut mask = vec![0u32; self.left.len()];
        // Internal node ids increase with insertion, but a node's children can
        // be younger, so evaluate in explicit post-order.
        let mut stack = vec![(self.root, false)];
        while let Some((v, done)) = stack.pop() {
            if v < n {
                mask[v] = 1 << v;
            } else if done {
                let (l, r) = (mask[self.left[v]], mask[self.right[v]]);
                let m = l | r;
                mask[v] = m;
                total += m.count_ones() as f64 * (within[m as usize] - within[l as usize] - within[r as usize]);
            } else {
                stack.push((v, true));
                stack.push((self.right[v], false));
                stack.push((self.left[v], false));
            }
        }
        total
    }
}

/// Maximum over all `(2n-3)!!` leaf-labeled rooted binary trees. The witness
/// is the optimal tree whose canonical form has the smallest serialization.
pub fn brute_force_hc(m: &Metric) -> Result<OracleResult<HcTree>, OracleError> {
    let n = m.n();
    if n > MAX_HC_ORACLE_N {
        return Err(OracleError::TooLarge { n, limit: MAX_HC_ORACLE_N });
    }
    if n == 1 {
        return Ok(OracleResult { value: 0.0, witness: HcTree::leaf(0), explored: 1 });
    }
    let mut within = vec![0.0; 1 << n];
    for mask in 1usize..(1 << n) {
        let top = usize::BITS - 1 - mask.leading_zeros();
        let rest = mask & !(1 << top);
        let mut w = within[rest];
        let row = m.row(top as usize);
        for (q, &d) in row.iter().enumerate() {
            if rest >> q & 1 == 1 {
                w += d;
            }
        }
        within[mask] = w;
    }

    let size = 2 * n - 1;
    let mut t = InsertionTree { left: vec![NONE; size], right: vec![NONE; size], parent: vec![NONE; size], root: n };
    t.left[n] = 0;
    t.right[n] = 1;
    t.parent[0] = n;
    t.parent[1] = n;

    let tol = tie_tolerance(m);
    let mut best: Option<(f64, String, HcTree)> = None;
    let mut explored = 0u64;
    insert_leaf(&mut t, n, 2, &within, tol, &mut best, &mut explored);
    let (_, _, witness) = best.expect("at least one tree");
    let value = evaluate_hc(m, &witness).expect("valid tree");
    Ok(OracleResult { value, witness, explored })
}

fn insert_leaf(
    t: &mut InsertionTree,
    n: usize,
    leaf: usize,
    within: &[f64],
    tol: f64,
    best: &mut Option<(f64, String, HcTree)>,
    explored: &mut u64,
) {
    if leaf == n {
        *explored += 1;
        let v = t.value(n, within);
        let replace = match best {
            None => true,
            Some((b, _, _)) if v > *b + tol => true,
            Some((b, _, _)) if v < *b - tol => false,
            Some((_, key, _)) => {
                let tree = t.to_tree(n);
                if tree.to_newick() < *key {
                    let key = tree.to_newick();
                    *best = Some((v.max(best.as_ref().unwrap().0), key, tree));
                }
                false
            }
        };
        if replace {
            let tree = t.to_tree(n);
            *best = Some((v, tree.to_newick(), tree));
        }
        return;
    }
    let u = n + leaf - 1;
    // Edges are identified by their lower endpoint; existing nodes are the
    // leaves `0..leaf` and internals `n..u`.
    let existing: Vec<usize> = (0..leaf).chain(n..u).collect();
    for v in existing {
        let p = t.parent[v];
        t.left[u] = v;
        t.right[u] = leaf;
        t.parent[v] = u;
        t.parent[leaf] = u;
        t.parent[u] = p;
        if p == NONE {
            t.root = u;
        } else if t.left[p] == v {
            t.left[p] = u;
        } else {
            t.right[p] = u;
        }

        insert_leaf(t, n, leaf + 1, within, tol, best, explored);

        if p == NONE {
            t.root = v;
        } else if t.left[p] == u {
            t.left[p] = v;
        } else {
            t.right[p] = v;
        }
        t.parent[v] = p;
        t.parent[leaf] = NONE;
        t.parent[u] = NONE;
        t.left[u] = NONE;
        t.right[u] = NONE;
    }
}

/// Random balanced bisection. The left half is ordered by decreasing total
/// distance to the right half and the right half by increasing total distance
/// to the left half, so the points with most cross weight sit at the two ends.
/// Ties go to the smaller id.
pub fn random_bisection_la(m: &Metric, seed: u64) -> LinearArrangement {
    let n = m.n();
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut seeded_rng(seed, 0));
    let (left, right) = ids.split_at(n / 2);
    let to = |p: usize, side: &[usize]| side.iter().map(|&q| m.get(p, q)).sum::<f64>();
    let mut l: Vec<(f64, usize)> = left.iter().map(|&p| (to(p, right), p)).collect();
    let mut r: Vec<(f64, usize)> = right.iter().map(|&p| (to(p, left), p)).collect();
    l.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    r.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let order: Vec<usize> = l.iter().chain(&r).map(|&(_, p)| p).collect();
    LinearArrangement::from_order(&order).expect("permutation")
}

/// Agglomerative average linkage: repeatedly merge the pair of clusters with
/// the smallest average distance. Clusters are numbered `0..n` for points and
/// `n, n+1, ...` in merge order; ties go to the lexicographically smallest
/// id pair, and the smaller id becomes the left child.
pub fn average_linkage_hc(m: &Metric) -> HcTree {
    let n = m.n();
    let mut trees: Vec<Option<HcTree>> = (0..n).map(|p| Some(HcTree::leaf(p))).collect();
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut sums: Vec<Vec<f64>> = m.to_rows();
    let mut active: Vec<usize> = (0..n).collect();
    let mut next_id = n;
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let avg = sums[a][b] / (sizes[a] * sizes[b]) as f64;
                let (lo, hi) = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                let better = match best {
                    None => true,
                    Some((bv, blo, bhi, _, _)) => avg.total_cmp(&bv).then((lo, hi).cmp(&(blo, bhi))).is_lt(),
                };
                if better {
                    best = Some((avg, lo, hi, a, b));
                }
            }
        }
        let (_, _, _, a, b) = best.expect("two active clusters");
        let (first, second) = if ids[a] < ids[b] { (a, b) } else { (b, a) };
        let joined = HcTree::join(trees[first].take().unwrap(), trees[second].take().unwrap());
        // The merged cluster reuses slot `a`.
        trees[a] = Some(joined);
        for &c in &active {
            if c != a && c != b {
                let s = sums[a][c] + sums[b][c];
                sums[a][c] = s;
                sums[c][a] = s;
            }
        }
        sizes[a] += sizes[b];
        ids[a] = next_id;
        next_id += 1;
        active.retain(|&c| c != b);
    }
    trees[active[0]].take().expect("root")
}
