//! Pieces shared by the dense solvers: grid mode, errors, and slot-swap hill
//! climbing for objectives of the form `Σ_{i<j} w(π_i, π_j) · K(i, j)` where
//! `K` depends only on slots (line distance, or LCA size in a fixed tree).

use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::Metric;
use crate::objectives::ObjectiveError;
use crate::partition::PartitionError;
use crate::seeded_rng;

/// Upper bound on naive grid cells (one partition search each).
pub const MAX_GRID_CELLS: u64 = 100_000;
/// Upper bound on (assignments × matching cells) for a grid sweep.
pub const MAX_SWEEP_WORK: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Enumerate the parameter grid and search each cell.
    Faithful,
    /// Local search directly on the objective.
    #[default]
    Reduced,
}

impl FromStr for GridMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(GridMode::Faithful),
            "reduced" => Ok(GridMode::Reduced),
            other => Err(format!("unknown grid mode {other:?} (expected faithful or reduced)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DenseError {
    #[error("eps must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("parameter grid too large: {cells} cells (limit {limit})")]
    GridTooLarge { cells: f64, limit: f64 },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

pub(crate) fn check_eps(eps: f64) -> Result<(), DenseError> {
    if eps.is_finite() && eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(DenseError::InvalidEps(eps))
    }
}

/// `round(1/eps)`, at least 1.
pub(crate) fn parts_for(eps: f64) -> usize {
    ((1.0 / eps).round() as usize).max(1)
}

/// Starting permutation for restart `r`: identity for `r = 0`, otherwise a
/// seeded shuffle.
pub(crate) fn start_permutation(n: usize, seed: u64, r: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    if r > 0 {
        perm.shuffle(&mut seeded_rng(seed, r));
    }
    perm
}

/// First-improvement hill climbing over slot swaps. `perm[s]` is the point in
/// slot `s`. Pairs are scanned cyclically in lexicographic order; stops after
/// a full pass without improvement or after `cap` evaluated swaps.
pub(crate) fn swap_hill_climb<K>(m: &Metric, perm: &mut [usize], kernel: K, cap: usize)
where
    K: Fn(usize, usize) -> f64,
{
    let n = perm.len();
    if n < 2 {
        return;
    }
    let pairs = n * (n - 1) / 2;
    let tol = 1e-12 * (m.total_weight() * n as f64).max(f64::MIN_POSITIVE);
    let (mut i, mut j) = (0usize, 1usize);
    let mut idle = 0usize;
    let mut evaluated = 0usize;
    while idle < pairs && evaluated < cap {
        let (a, b) = (perm[i], perm[j]);
        let (ra, rb) = (m.row(a), m.row(b));
        let mut delta = 0.0;
        for (x, &px) in perm.iter().enumerate() {
            if x != i && x != j {
                delta += (ra[px] - rb[px]) * (kernel(j, x) - kernel(i, x));
            }
        }
        evaluated += 1;
        if delta > tol {
            perm.swap(i, j);
            idle = 0;
        } else {
            idle += 1;
        }
        j += 1;
        if j == n {
            i += 1;
            if i == n - 1 {
                i = 0;
            }
            j = i + 1;
        }
    }
}

/// Index of the best `(value, key)`: highest value, ties to the smallest key.
pub(crate) fn argmax_by_key<T: Ord>(items: &[(f64, T)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (idx, item) in items.iter().enumerate() {
        best = match best {
            None => Some(idx),
            Some(b) => {
                let cur = &items[b];
                let better = item.0.total_cmp(&cur.0).then_with(|| cur.1.cmp(&item.1));
                if better == std::cmp::Ordering::Greater {
                    Some(idx)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hill_climb_reaches_line_optimum_on_path() {
        // Points on a path: the identity order is optimal; start from a shuffle.
        let n = 6;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect()).collect();
        let m = Metric::from_rows(&rows).unwrap();
        let mut perm = start_permutation(n, 3, 1);
        swap_hill_climb(&m, &mut perm, |i, j| (i as f64 - j as f64).abs(), 10_000);
        let value: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m.get(perm[i], perm[j]) * (j - i) as f64)
            .sum();
        // Best arrangement of a path alternates ends: value is the brute-force max.
        let best = crate::oracles::brute_force_la(&m).unwrap().value;
        assert!(value <= best + 1e-9);
        assert!(value >= 0.9 * best);
    }

    #[test]
    fn argmax_prefers_smaller_key_on_ties() {
        let items = vec![(1.0, vec![2]), (3.0, vec![5]), (3.0, vec![4]), (2.0, vec![0])];
        assert_eq!(argmax_by_key(&items), Some(2));
        assert_eq!(argmax_by_key::<u8>(&[]), None);
    }

    #[test]
    fn grid_mode_parses() {
        assert_eq!("faithful".parse::<GridMode>().unwrap(), GridMode::Faithful);
        assert!("fast".parse::<GridMode>().is_err());
    }
}
