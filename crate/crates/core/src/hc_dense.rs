//! Hierarchical clustering for dense instances: a small skeleton tree with
//! `k = round(1/ε)` internal nodes whose `k + 1` leaf slots each hold one part
//! of a guessed partition, hung as a ladder.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metric::Metric;
use crate::objectives::{evaluate_hc, ladder_tree, HcTree};
use crate::partition::{Grid, SearchBudget, SpecGrid};
use crate::search::{
    argmax_by_key, check_eps, parts_for, start_permutation, swap_hill_climb, DenseError, GridMode, MAX_SWEEP_WORK,
};
use crate::seeded_rng;

/// Upper bound on skeleton shapes enumerated in faithful mode.
const MAX_SKELETONS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseHcConfig {
    pub eps: f64,
    pub grid_mode: GridMode,
    pub budget: SearchBudget,
    pub seed: u64,
}

impl DenseHcConfig {
    pub fn new(eps: f64) -> Self {
        DenseHcConfig { eps, grid_mode: GridMode::Reduced, budget: SearchBudget::default(), seed: 0 }
    }

    pub fn faithful(eps: f64) -> Self {
        DenseHcConfig { grid_mode: GridMode::Faithful, ..Self::new(eps) }
    }

    /// Internal nodes of the skeleton.
    pub fn internal_nodes(&self) -> usize {
        parts_for(self.eps)
    }
}

/// Unlabeled rooted binary tree whose leaves are slots, numbered left to right.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Skeleton {
    Slot,
    Join(Box<Skeleton>, Box<Skeleton>),
}

impl Skeleton {
    pub fn slots(&self) -> usize {
        match self {
            Skeleton::Slot => 1,
            Skeleton::Join(l, r) => l.slots() + r.slots(),
        }
    }

    /// Hangs `parts[s]` under slot `s` as an ascending ladder; empty slots
    /// vanish along with their parent's branching. `None` if all are empty.
    pub fn assemble(&self, parts: &[Vec<usize>]) -> Option<HcTree> {
        fn go(s: &Skeleton, parts: &[Vec<usize>], next: &mut usize) -> Option<HcTree> {
            match s {
                Skeleton::Slot => {
                    let part = &parts[*next];
                    *next += 1;
                    (!part.is_empty()).then(|| ladder_tree(part, None).expect("distinct points"))
                }
                Skeleton::Join(l, r) => match (go(l, parts, next), go(r, parts, next)) {
                    (Some(a), Some(b)) => Some(HcTree::join(a, b)),
                    (a, b) => a.or(b),
                },
            }
        }
        let mut next = 0;
        go(self, parts, &mut next)
    }

    fn balanced(slots: usize) -> Skeleton {
        if slots == 1 {
            Skeleton::Slot
        } else {
            let l = slots / 2;
            Skeleton::Join(Box::new(Self::balanced(l)), Box::new(Self::balanced(slots - l)))
        }
    }

    fn random(slots: usize, rng: &mut impl Rng) -> Skeleton {
        if slots == 1 {
            Skeleton::Slot
        } else {
            let l = rng.random_range(1..slots);
            Skeleton::Join(Box::new(Self::random(l, rng)), Box::new(Self::random(slots - l, rng)))
        }
    }
}

/// All skeleton shapes with `slots` leaves, one per unordered shape: the
/// left subtree is never larger than the right, and equal-sized subtrees are
/// ordered.
pub fn enumerate_skeletons(slots: usize) -> Vec<Skeleton> {
    let mut by_size: Vec<Vec<Skeleton>> = vec![Vec::new(), vec![Skeleton::Slot]];
    for m in 2..=slots {
        let mut shapes = Vec::new();
        for l in 1..=m / 2 {
            let r = m - l;
            for (i, left) in by_size[l].iter().enumerate() {
                let start = if l == r { i } else { 0 };
                for right in &by_size[r][start..] {
                    shapes.push(Skeleton::Join(Box::new(left.clone()), Box::new(right.clone())));
                }
            }
        }
        by_size.push(shapes);
    }
    by_size.swap_remove(slots)
}

/// Number of shapes [`enumerate_skeletons`] yields, saturating.
pub fn skeleton_count(slots: usize) -> u64 {
    let mut c = vec![0u64; slots.max(1) + 1];
    c[1] = 1;
    for m in 2..=slots {
        let mut total = 0u64;
        for l in 1..=m / 2 {
            let r = m - l;
            let ways = if l == r { c[l].saturating_mul(c[l].saturating_add(1)) / 2 } else { c[l].saturating_mul(c[r]) };
            total = total.saturating_add(ways);
        }
        c[m] = total;
    }
    c[slots]
}

/// True when at most a `1 - c1` fraction of point pairs is closer than
/// `c0 · D_V`. Holds vacuously without pairs.
pub fn has_not_all_small_weights(m: &Metric, c0: f64, c1: f64) -> bool {
    let n = m.n();
    if n < 2 {
        return true;
    }
    let cut = c0 * m.diameter();
    let mut small = 0usize;
    for i in 0..n {
        small += m.row(i)[i + 1..].iter().filter(|&&d| d < cut).count();
    }
    let pairs = n * (n - 1) / 2;
    small as f64 / pairs as f64 <= 1.0 - c1
}

pub fn solve_hc_dense(m: &Metric, cfg: &DenseHcConfig) -> Result<HcTree, DenseError> {
    check_eps(cfg.eps)?;
    let n = m.n();
    let ladder = ladder_tree(&(0..n).collect::<Vec<_>>(), None)?;
    if n <= 2 || m.diameter() == 0.0 {
        return Ok(ladder);
    }
    let mut candidates = match cfg.grid_mode {
        GridMode::Faithful => faithful(m, cfg)?,
        GridMode::Reduced => reduced(m, cfg),
    };
    // The plain ladder is always in the running, and wins ties.
    candidates.insert(0, ladder);
    let scored: Vec<(f64, usize)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, t)| (evaluate_hc(m, t).expect("tree covers all points"), i))
        .collect();
    let best = argmax_by_key(&scored).expect("ladder candidate");
    Ok(candidates.swap_remove(best))
}

fn faithful(m: &Metric, cfg: &DenseHcConfig) -> Result<Vec<HcTree>, DenseError> {
    let n = m.n();
    let k = cfg.internal_nodes();
    let slots = k + 1;
    let eps = cfg.eps;
    let skeletons = skeleton_count(slots);
    if skeletons > MAX_SKELETONS {
        return Err(DenseError::GridTooLarge { cells: skeletons as f64, limit: MAX_SKELETONS as f64 });
    }
    let size_grid = Grid::Uniform { step: eps * eps, max_index: (3.0 / eps + 1e-9).floor() as u32 };
    let weight_grid = Grid::Uniform { step: eps.powi(3), max_index: (9.0 / eps + 1e-9).floor() as u32 };
    let grid = SpecGrid { sizes: vec![size_grid; slots], weights: weight_grid, slack: eps.powi(3) };

    // Every grid cell is an exact-target spec, so the partition search for a
    // cell is exhaustive only on small inputs; larger inputs would need one
    // local search per cell over a grid that is never small here.
    if n > cfg.budget.exhaustive_n {
        let cells = grid.cell_count() as f64;
        return Err(DenseError::GridTooLarge { cells, limit: crate::search::MAX_GRID_CELLS as f64 });
    }
    let pairs = (slots * (slots - 1) / 2) as i32;
    let per_size = (2.0 * grid.slack / (eps * eps)).floor() + 2.0;
    let per_weight = (2.0 * grid.slack / eps.powi(3)).floor() + 2.0;
    let work = (slots as f64).powi(n as i32) * per_size.powi(slots as i32) * per_weight.powi(pairs);
    if work > MAX_SWEEP_WORK {
        return Err(DenseError::GridTooLarge { cells: work, limit: MAX_SWEEP_WORK });
    }
    let hits = grid.first_hits(m);
    let shapes = enumerate_skeletons(slots);
    let mut trees = Vec::with_capacity(hits.len() * shapes.len());
    for shape in &shapes {
        for a in &hits {
            let mut parts = vec![Vec::new(); slots];
            for (p, &s) in a.iter().enumerate() {
                parts[s].push(p);
            }
            trees.extend(shape.assemble(&parts));
        }
    }
    Ok(trees)
}

/// One restart: fix a skeleton and slot sizes, then hill-climb which point
/// sits in which leaf position of the resulting tree.
fn reduced(m: &Metric, cfg: &DenseHcConfig) -> Vec<HcTree> {
    let n = m.n();
    let slots = cfg.internal_nodes() + 1;
    let cap = cfg.budget.moves_per_point.saturating_mul(n);
    (0..cfg.budget.restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let (shape, sizes) = if r == 0 {
                let mut sizes = vec![n / slots; slots];
                sizes[slots - 1] += n % slots;
                (Skeleton::balanced(slots), sizes)
            } else {
                // Stream offset keeps shapes independent of the permutation.
                let mut rng = seeded_rng(cfg.seed, r | 1 << 63);
                let shape = Skeleton::random(slots, &mut rng);
                let mut sizes = vec![0usize; slots];
                for _ in 0..n {
                    sizes[rng.random_range(0..slots)] += 1;
                }
                (shape, sizes)
            };
            let mut parts = Vec::with_capacity(slots);
            let mut next = 0;
            for s in sizes {
                parts.push((next..next + s).collect::<Vec<_>>());
                next += s;
            }
            let positional = shape.assemble(&parts).expect("n >= 1");
            let lca = positional.lca_size_matrix(n);
            let mut perm = start_permutation(n, cfg.seed, r);
            swap_hill_climb(m, &mut perm, |i, j| lca[i * n + j] as f64, cap);
            positional.relabel(&perm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::brute_force_hc;

    fn uniform(n: usize) -> Metric {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect();
        Metric::from_rows(&rows).unwrap()
    }

    fn two_triangles() -> Metric {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else if (i < 3) == (j < 3) {
                            0.1
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect();
        Metric::from_rows(&rows).unwrap()
    }

    #[test]
    fn skeleton_counts() {
        // Unordered rooted binary shapes: 1, 1, 1, 2, 3, 6, 11, 23.
        for (slots, count) in [(1, 1), (2, 1), (3, 1), (4, 2), (5, 3), (6, 6), (7, 11), (8, 23)] {
            assert_eq!(enumerate_skeletons(slots).len(), count, "slots {slots}");
            assert_eq!(skeleton_count(slots), count as u64);
        }
    }

    #[test]
    fn empty_slots_collapse() {
        let s = Skeleton::balanced(3);
        let t = s.assemble(&[vec![2], vec![], vec![0, 1]]).unwrap();
        assert_eq!(t.to_newick(), "(2,(0,1));");
        assert!(s.assemble(&[vec![], vec![], vec![]]).is_none());
    }

    #[test]
    fn pair_is_the_unique_tree() {
        let m = Metric::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let t = solve_hc_dense(&m, &DenseHcConfig::faithful(0.5)).unwrap();
        assert!((evaluate_hc(&m, &t).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn uniform_scores_twenty() {
        for cfg in [DenseHcConfig::faithful(0.5), DenseHcConfig::new(0.5)] {
            let t = solve_hc_dense(&uniform(4), &cfg).unwrap();
            assert_eq!(evaluate_hc(&uniform(4), &t).unwrap(), 20.0);
        }
    }

    #[test]
    fn two_clusters_reach_tree_optimum() {
        let m = two_triangles();
        let opt = brute_force_hc(&m).unwrap().value;
        for cfg in [DenseHcConfig::faithful(0.5), DenseHcConfig::new(0.5)] {
            let t = solve_hc_dense(&m, &cfg).unwrap();
            assert!((evaluate_hc(&m, &t).unwrap() - opt).abs() < 1e-9, "{cfg:?}");
        }
    }

    #[test]
    fn small_weight_predicate() {
        let m = two_triangles();
        // 6 of 15 pairs sit at 0.1.
        assert!(has_not_all_small_weights(&m, 0.2, 0.6));
        assert!(!has_not_all_small_weights(&m, 0.2, 0.61));
        assert!(has_not_all_small_weights(&Metric::from_rows(&[vec![0.0]]).unwrap(), 0.5, 0.5));
    }
}
