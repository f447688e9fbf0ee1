//! Linear arrangement for dense instances by guessing a partition into
//! `k = round(1/ε)` equal blocks and their crossing weights, then laying the
//! blocks out consecutively.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metric::Metric;
use crate::objectives::{evaluate_la, LinearArrangement};
use crate::partition::{search_partition, Grid, SearchBudget, SpecGrid};
use crate::search::{
    argmax_by_key, check_eps, parts_for, start_permutation, swap_hill_climb, DenseError, GridMode, MAX_GRID_CELLS,
    MAX_SWEEP_WORK,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseLaConfig {
    pub eps: f64,
    pub grid_mode: GridMode,
    pub budget: SearchBudget,
    pub seed: u64,
}

impl DenseLaConfig {
    pub fn new(eps: f64) -> Self {
        DenseLaConfig { eps, grid_mode: GridMode::Reduced, budget: SearchBudget::default(), seed: 0 }
    }

    pub fn faithful(eps: f64) -> Self {
        DenseLaConfig { grid_mode: GridMode::Faithful, ..Self::new(eps) }
    }

    pub fn parts(&self) -> usize {
        parts_for(self.eps)
    }
}

/// Block sizes: `floor(n/k)` each, remainder to the last block.
pub fn block_sizes(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let mut sizes = vec![base; k];
    sizes[k - 1] += n - base * k;
    sizes
}

/// Blocks laid out left to right by part id, ascending point id inside each.
pub fn consecutive_embedding(assignment: &[usize], k: usize) -> LinearArrangement {
    let mut order = Vec::with_capacity(assignment.len());
    for part in 0..k {
        order.extend(assignment.iter().enumerate().filter(|(_, &a)| a == part).map(|(p, _)| p));
    }
    LinearArrangement::from_order(&order).expect("assignment covers every point")
}

pub fn solve_la_dense(m: &Metric, cfg: &DenseLaConfig) -> Result<LinearArrangement, DenseError> {
    check_eps(cfg.eps)?;
    let n = m.n();
    if n <= 2 || m.diameter() == 0.0 {
        return Ok(LinearArrangement::identity(n));
    }
    match cfg.grid_mode {
        GridMode::Faithful => faithful(m, cfg),
        GridMode::Reduced => Ok(reduced(m, cfg)),
    }
}

fn faithful(m: &Metric, cfg: &DenseLaConfig) -> Result<LinearArrangement, DenseError> {
    let n = m.n();
    let k = cfg.parts();
    if n < k {
        return Ok(LinearArrangement::identity(n));
    }
    let eps = cfg.eps;
    let sizes = block_sizes(n, k);
    let grid = SpecGrid {
        sizes: sizes.iter().map(|&s| Grid::Fixed(s as f64 / n as f64)).collect(),
        weights: Grid::Uniform { step: eps.powi(9), max_index: (eps.powi(-7) + 1e-9).floor() as u32 },
        slack: eps.powi(9),
    };
    let pairs = (k * (k - 1) / 2) as i32;

    let assignments: Vec<Vec<usize>> = if n <= cfg.budget.exhaustive_n {
        // Each weight coordinate matches at most 2·slack/step + 1 grid points.
        let work = multinomial(&sizes) * 4f64.powi(pairs);
        if work > MAX_SWEEP_WORK {
            return Err(DenseError::GridTooLarge { cells: work, limit: MAX_SWEEP_WORK });
        }
        grid.first_hits(m)
    } else {
        let cells = grid.cell_count();
        if cells > MAX_GRID_CELLS {
            return Err(DenseError::GridTooLarge { cells: cells as f64, limit: MAX_GRID_CELLS as f64 });
        }
        let dims = vec![grid.weights.len(); pairs as usize];
        let found: Vec<Option<Vec<usize>>> = (0..cells)
            .into_par_iter()
            .map(|cell| {
                let weights = unrank(cell, &dims);
                let spec = grid.spec(&vec![0; k], &weights);
                search_partition(m, &spec, grid.slack, &cfg.budget, cfg.seed).map(|o| o.found().map(|p| p.assignment))
            })
            .collect::<Result<_, _>>()?;
        found.into_iter().flatten().collect::<BTreeSet<_>>().into_iter().collect()
    };

    let scored: Vec<(f64, Vec<usize>)> = assignments
        .par_iter()
        .map(|a| {
            let y = consecutive_embedding(a, k);
            (evaluate_la(m, &y).expect("sizes match"), y.order())
        })
        .collect();
    Ok(match argmax_by_key(&scored) {
        Some(idx) => LinearArrangement::from_order(&scored[idx].1).expect("valid order"),
        None => LinearArrangement::identity(n),
    })
}

fn reduced(m: &Metric, cfg: &DenseLaConfig) -> LinearArrangement {
    let n = m.n();
    let cap = cfg.budget.moves_per_point.saturating_mul(n);
    let scored: Vec<(f64, Vec<usize>)> = (0..cfg.budget.restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut perm = start_permutation(n, cfg.seed, r);
            swap_hill_climb(m, &mut perm, |i, j| i.abs_diff(j) as f64, cap);
            let y = LinearArrangement::from_order(&perm).expect("permutation");
            (evaluate_la(m, &y).expect("sizes match"), perm)
        })
        .collect();
    let best = argmax_by_key(&scored).expect("at least one restart");
    LinearArrangement::from_order(&scored[best].1).expect("permutation")
}

/// Number of assignments with the given part sizes.
fn multinomial(sizes: &[usize]) -> f64 {
    let mut total = 0usize;
    let mut out = 1.0;
    for &s in sizes {
        for i in 1..=s {
            total += 1;
            out *= total as f64 / i as f64;
        }
    }
    out
}

/// Mixed-radix digits of `index`, least significant first.
pub(crate) fn unrank(mut index: u64, dims: &[u64]) -> Vec<u32> {
    dims.iter()
        .map(|&d| {
            let digit = index % d;
            index /= d;
            digit as u32
        })
        .collect()
}
