//! Partition search honoring size and crossing-weight bounds.
//!
//! Given a spec Φ of per-part size fractions `λ` (of `n`) and per-pair weight
//! fractions `μ` (of `n²·D_V`), find a `k`-partition whose sizes and crossing
//! weights meet every bound up to an additive `eps_err`. Small instances are
//! searched exhaustively, so `NotFound` there means no such partition exists.
//! Larger instances use seeded greedy construction plus local search, where
//! `NotFound` only means none was found within the budget.

use std::collections::HashSet;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::Metric;
use crate::seeded_rng;

/// Absolute tolerance on bound fractions, absorbing summation rounding.
const FRACTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("invalid partition spec: {0}")]
    InvalidSpec(String),
    #[error("size bounds cannot sum to one: lower sum {lower_sum}, upper sum {upper_sum}")]
    SpecInfeasibleTrivially { lower_sum: f64, upper_sum: f64 },
    #[error("slack must be a nonnegative finite number, got {0}")]
    InvalidSlack(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Largest `n` searched exhaustively.
    pub exhaustive_n: usize,
    pub restarts: usize,
    /// Move cap per restart, as a multiple of `n`.
    pub moves_per_point: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { exhaustive_n: 12, restarts: 32, moves_per_point: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBound {
    pub parts: (usize, usize),
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub k: usize,
    /// `(λ_LB, λ_UB)` per part, as fractions of `n`.
    pub size_bounds: Vec<(f64, f64)>,
    /// Bounds on `W_{V_j,V_j'}` as fractions of `n²·D_V`; `(j, j)` bounds the
    /// internal weight of part `j`. Pairs without an entry are unconstrained.
    #[serde(default)]
    pub weight_bounds: Vec<WeightBound>,
}

impl PartitionSpec {
    pub fn from_json(text: &str) -> Result<Self, PartitionError> {
        let spec: PartitionSpec = serde_json::from_str(text).map_err(|e| PartitionError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        let bad = |msg: String| Err(PartitionError::InvalidSpec(msg));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.size_bounds.len() != self.k {
            return bad(format!("{} size bounds for k = {}", self.size_bounds.len(), self.k));
        }
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi;
        for (j, &(lo, hi)) in self.size_bounds.iter().enumerate() {
            if !ok(lo, hi) {
                return bad(format!("size bounds of part {j} are ({lo}, {hi})"));
            }
        }
        for b in &self.weight_bounds {
            if b.parts.0 >= self.k || b.parts.1 >= self.k {
                return bad(format!("weight bound on parts {:?} with k = {}", b.parts, self.k));
            }
            if !ok(b.lower, b.upper) {
                return bad(format!("weight bounds of {:?} are ({}, {})", b.parts, b.lower, b.upper));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub part_sizes: Vec<usize>,
    /// Symmetric `k × k`; the diagonal holds each part's internal weight.
    pub crossing_weights: Vec<Vec<f64>>,
}

impl Partition {
    /// Recomputes sizes and weights from scratch.
    pub fn from_assignment(m: &Metric, k: usize, assignment: Vec<usize>) -> Self {
        let mut part_sizes = vec![0; k];
        let mut crossing_weights = vec![vec![0.0; k]; k];
        for (p, &a) in assignment.iter().enumerate() {
            part_sizes[a] += 1;
            let row = m.row(p);
            for q in (p + 1)..assignment.len() {
                let b = assignment[q];
                crossing_weights[a][b] += row[q];
                if a != b {
                    crossing_weights[b][a] += row[q];
                }
            }
        }
        Partition { assignment, part_sizes, crossing_weights }
    }

    /// Assignment line followed by the crossing-weight matrix block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let line: Vec<String> = self.assignment.iter().map(|a| a.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
        for row in &self.crossing_weights {
            let cells: Vec<String> = row.iter().map(|w| w.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parts(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.part_sizes.len()];
        for (p, &a) in self.assignment.iter().enumerate() {
            parts[a].push(p);
        }
        parts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found(Partition),
    NotFound { best_penalty: f64 },
}

impl SearchOutcome {
    pub fn found(self) -> Option<Partition> {
        match self {
            SearchOutcome::Found(p) => Some(p),
            SearchOutcome::NotFound { .. } => None,
        }
    }
}

/// Normalized bounds used during search.
struct Bounds {
    k: usize,
    n: f64,
    weight_scale: f64,
    slack: f64,
    size: Vec<(f64, f64)>,
    /// Flat `k × k`, mirrored for off-diagonal pairs.
    weight: Vec<Option<(f64, f64)>>,
}

impl Bounds {
    fn new(m: &Metric, spec: &PartitionSpec, slack: f64) -> Self {
        let k = spec.k;
        let n = m.n() as f64;
        let mut weight = vec![None; k * k];
        for b in &spec.weight_bounds {
            let (j, l) = b.parts;
            let merged = match weight[j * k + l] {
                Some((lo, hi)) => (b.lower.max(lo), b.upper.min(hi)),
                None => (b.lower, b.upper),
            };
            weight[j * k + l] = Some(merged);
            weight[l * k + j] = Some(merged);
        }
        Bounds { k, n, weight_scale: n * n * m.diameter(), slack, size: spec.size_bounds.clone(), weight }
    }

    fn excess(value: f64, (lo, hi): (f64, f64), slack: f64) -> f64 {
        let v = (lo - slack - value).max(value - hi - slack).max(0.0);
        if v <= FRACTION_TOL {
            0.0
        } else {
            v
        }
    }

    fn weight_fraction(&self, w: f64) -> f64 {
        if self.weight_scale > 0.0 {
            w / self.weight_scale
        } else {
            0.0
        }
    }

    /// Sum of fractional bound violations beyond the slack; zero iff feasible.
    fn penalty(&self, sizes: &[usize], crossing: &[f64]) -> f64 {
        let k = self.k;
        let mut total = 0.0;
        for (j, &s) in sizes.iter().enumerate() {
            total += Self::excess(s as f64 / self.n, self.size[j], self.slack);
        }
        for j in 0..k {
            for l in j..k {
                if let Some(b) = self.weight[j * k + l] {
                    total += Self::excess(self.weight_fraction(crossing[j * k + l]), b, self.slack);
                }
            }
        }
        total
    }

    fn max_size(&self, j: usize) -> usize {
        ((self.size[j].1 + self.slack + FRACTION_TOL) * self.n).floor() as usize
    }

    fn min_size(&self, j: usize) -> usize {
        ((self.size[j].0 - self.slack - FRACTION_TOL) * self.n).ceil().max(0.0) as usize
    }
}

/// Depth-first enumeration of assignments in lexicographic order, with sizes
/// kept in `[min, max]` and crossing weights maintained incrementally.
pub(crate) struct Enumeration<'a> {
    m: &'a Metric,
    k: usize,
    min_size: Vec<usize>,
    max_size: Vec<usize>,
    /// Flat `k × k` caps on (upward-only) accumulated weights.
    weight_cap: Vec<f64>,
}

impl<'a> Enumeration<'a> {
    pub(crate) fn new(m: &'a Metric, min_size: Vec<usize>, max_size: Vec<usize>) -> Self {
        let k = min_size.len();
        Enumeration { m, k, min_size, max_size, weight_cap: vec![f64::INFINITY; k * k] }
    }

    pub(crate) fn run<F>(&self, mut visit: F)
    where
        F: FnMut(&[usize], &[usize], &[f64]) -> ControlFlow<()>,
    {
        let n = self.m.n();
        let mut assignment = vec![0usize; n];
        let mut sizes = vec![0usize; self.k];
        let mut crossing = vec![0.0; self.k * self.k];
        let _ = self.descend(0, &mut assignment, &mut sizes, &mut crossing, &mut visit);
    }

    fn descend<F>(
        &self,
        p: usize,
        assignment: &mut Vec<usize>,
        sizes: &mut Vec<usize>,
        crossing: &mut Vec<f64>,
        visit: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&[usize], &[usize], &[f64]) -> ControlFlow<()>,
    {
        let n = self.m.n();
        let k = self.k;
        if p == n {
            return visit(assignment, sizes, crossing);
        }
        let remaining = n - p - 1;
        let row = self.m.row(p);
        for j in 0..k {
            if sizes[j] + 1 > self.max_size[j] {
                continue;
            }
            sizes[j] += 1;
            let deficit: usize = (0..k).map(|l| self.min_size[l].saturating_sub(sizes[l])).sum();
            if deficit <= remaining {
                let saved = crossing.clone();
                let mut within_caps = true;
                for q in 0..p {
                    let l = assignment[q];
                    crossing[j * k + l] += row[q];
                    if l != j {
                        crossing[l * k + j] += row[q];
                    }
                }
                for l in 0..k {
                    if crossing[j * k + l] > self.weight_cap[j * k + l] {
                        within_caps = false;
                        break;
                    }
                }
                if within_caps {
                    assignment[p] = j;
                    self.descend(p + 1, assignment, sizes, crossing, visit)?;
                }
                *crossing = saved;
            }
            sizes[j] -= 1;
        }
        ControlFlow::Continue(())
    }
}

/// Finds a partition meeting `spec` within `eps_err` (fractions of `n` for
/// sizes and of `n²·D_V` for weights). Any returned partition has been
/// re-verified by exact recomputation.
pub fn search_partition(
    m: &Metric,
    spec: &PartitionSpec,
    eps_err: f64,
    budget: &SearchBudget,
    seed: u64,
) -> Result<SearchOutcome, PartitionError> {
    spec.validate()?;
    if !(eps_err.is_finite() && eps_err >= 0.0) {
        return Err(PartitionError::InvalidSlack(eps_err));
    }
    if spec.k > m.n() {
        return Err(PartitionError::InvalidSpec(format!("k = {} exceeds n = {}", spec.k, m.n())));
    }
    let lower_sum: f64 = spec.size_bounds.iter().map(|b| b.0).sum();
    let upper_sum: f64 = spec.size_bounds.iter().map(|b| b.1).sum();
    // Slack applies per part, so only a gap wider than `k·eps_err` rules out
    // every partition.
    let reach = spec.k as f64 * eps_err + FRACTION_TOL;
    if lower_sum > 1.0 + reach || upper_sum < 1.0 - reach {
        return Err(PartitionError::SpecInfeasibleTrivially { lower_sum, upper_sum });
    }
    let bounds = Bounds::new(m, spec, eps_err);
    let candidate =
        if m.n() <= budget.exhaustive_n { exhaustive(m, &bounds) } else { local_search(m, &bounds, budget, seed) };
    Ok(match candidate {
        Ok(assignment) => {
            let part = Partition::from_assignment(m, spec.k, assignment);
            let flat: Vec<f64> = part.crossing_weights.iter().flatten().copied().collect();
            let penalty = bounds.penalty(&part.part_sizes, &flat);
            if penalty == 0.0 {
                SearchOutcome::Found(part)
            } else {
                SearchOutcome::NotFound { best_penalty: penalty }
            }
        }
        Err(best_penalty) => SearchOutcome::NotFound { best_penalty },
    })
}

/// Lexicographically first feasible assignment, or `Err(INFINITY)`.
fn exhaustive(m: &Metric, bounds: &Bounds) -> Result<Vec<usize>, f64> {
    let k = bounds.k;
    let min_size = (0..k).map(|j| bounds.min_size(j)).collect();
    let max_size = (0..k).map(|j| bounds.max_size(j)).collect();
    let mut en = Enumeration::new(m, min_size, max_size);
    for (idx, b) in bounds.weight.iter().enumerate() {
        if let Some((_, hi)) = b {
            en.weight_cap[idx] =
                (hi + bounds.slack + FRACTION_TOL) * bounds.weight_scale + FRACTION_TOL * bounds.weight_scale.max(1.0);
        }
    }
    let mut found = None;
    en.run(|assignment, sizes, crossing| {
        if bounds.penalty(sizes, crossing) == 0.0 {
            found = Some(assignment.to_vec());
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    found.ok_or(f64::INFINITY)
}

struct SearchState<'a> {
    m: &'a Metric,
    bounds: &'a Bounds,
    assignment: Vec<usize>,
    sizes: Vec<usize>,
    crossing: Vec<f64>,
    /// `n × k`: weight from each point to the other members of each part.
    to_part: Vec<f64>,
}

impl<'a> SearchState<'a> {
    fn new(m: &'a Metric, bounds: &'a Bounds, assignment: Vec<usize>) -> Self {
        let k = bounds.k;
        let n = m.n();
        let mut sizes = vec![0; k];
        let mut crossing = vec![0.0; k * k];
        let mut to_part = vec![0.0; n * k];
        for p in 0..n {
            let a = assignment[p];
            sizes[a] += 1;
            let row = m.row(p);
            for q in 0..n {
                if q != p {
                    to_part[p * k + assignment[q]] += row[q];
                }
            }
            for q in (p + 1)..n {
                let b = assignment[q];
                crossing[a * k + b] += row[q];
                if a != b {
                    crossing[b * k + a] += row[q];
                }
            }
        }
        SearchState { m, bounds, assignment, sizes, crossing, to_part }
    }

    fn penalty(&self) -> f64 {
        self.bounds.penalty(&self.sizes, &self.crossing)
    }

    /// Applies "move `p` from `from` to `to`" to scratch copies, given `p`'s
    /// per-part weights.
    fn shift(k: usize, sizes: &mut [usize], crossing: &mut [f64], to_part: &[f64], from: usize, to: usize) {
        sizes[from] -= 1;
        sizes[to] += 1;
        crossing[from * k + from] -= to_part[from];
        for c in 0..k {
            if c != from {
                crossing[from * k + c] -= to_part[c];
                crossing[c * k + from] -= to_part[c];
            }
        }
        crossing[to * k + to] += to_part[to];
        for c in 0..k {
            if c != to {
                crossing[to * k + c] += to_part[c];
                crossing[c * k + to] += to_part[c];
            }
        }
    }

    fn move_penalty(&self, p: usize, to: usize) -> f64 {
        let k = self.bounds.k;
        let mut sizes = self.sizes.clone();
        let mut crossing = self.crossing.clone();
        let from = self.assignment[p];
        Self::shift(k, &mut sizes, &mut crossing, &self.to_part[p * k..(p + 1) * k], from, to);
        self.bounds.penalty(&sizes, &crossing)
    }

    fn swap_penalty(&self, p: usize, q: usize) -> f64 {
        let k = self.bounds.k;
        let (a, b) = (self.assignment[p], self.assignment[q]);
        let mut sizes = self.sizes.clone();
        let mut crossing = self.crossing.clone();
        Self::shift(k, &mut sizes, &mut crossing, &self.to_part[p * k..(p + 1) * k], a, b);
        let w = self.m.get(p, q);
        let mut q_part = self.to_part[q * k..(q + 1) * k].to_vec();
        q_part[a] -= w;
        q_part[b] += w;
        Self::shift(k, &mut sizes, &mut crossing, &q_part, b, a);
        self.bounds.penalty(&sizes, &crossing)
    }

    fn apply_move(&mut self, p: usize, to: usize) {
        let k = self.bounds.k;
        let from = self.assignment[p];
        let p_part = self.to_part[p * k..(p + 1) * k].to_vec();
        Self::shift(k, &mut self.sizes, &mut self.crossing, &p_part, from, to);
        self.assignment[p] = to;
        let row = self.m.row(p);
        for (q, &d) in row.iter().enumerate() {
            if q != p {
                self.to_part[q * k + from] -= d;
                self.to_part[q * k + to] += d;
            }
        }
    }
}

/// Best penalty and assignment over all restarts, or `Err(best_penalty)`.
fn local_search(m: &Metric, bounds: &Bounds, budget: &SearchBudget, seed: u64) -> Result<Vec<usize>, f64> {
    let best = (0..budget.restarts.max(1))
        .into_par_iter()
        .map(|r| run_restart(m, bounds, budget, seed, r as u64))
        .reduce_with(|a, b| match a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)) {
            std::cmp::Ordering::Greater => b,
            _ => a,
        })
        .expect("at least one restart");
    if best.0 == 0.0 {
        Ok(best.1)
    } else {
        Err(best.0)
    }
}

fn run_restart(m: &Metric, bounds: &Bounds, budget: &SearchBudget, seed: u64, restart: u64) -> (f64, Vec<usize>) {
    let n = m.n();
    let k = bounds.k;
    let mut rng = seeded_rng(seed, restart);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let targets: Vec<f64> = bounds.size.iter().map(|&(lo, hi)| 0.5 * (lo + hi) * bounds.n).collect();
    let mut sizes = vec![0usize; k];
    let mut assignment = vec![0usize; n];
    for &p in &order {
        let j = (0..k)
            .max_by(|&a, &b| {
                let da = targets[a] - sizes[a] as f64;
                let db = targets[b] - sizes[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k >= 1");
        assignment[p] = j;
        sizes[j] += 1;
    }

    let mut state = SearchState::new(m, bounds, assignment);
    let mut current = state.penalty();
    let cap = budget.moves_per_point.saturating_mul(n);
    let mut moves = 0;
    while current > 0.0 && moves < cap {
        let mut best: Option<(f64, usize, usize, bool)> = None;
        for p in 0..n {
            for to in 0..k {
                if to == state.assignment[p] {
                    continue;
                }
                let v = state.move_penalty(p, to);
                if v < current && best.is_none_or(|b| v < b.0) {
                    best = Some((v, p, to, false));
                }
            }
        }
        if best.is_none() {
            for p in 0..n {
                for q in (p + 1)..n {
                    if state.assignment[p] == state.assignment[q] {
                        continue;
                    }
                    let v = state.swap_penalty(p, q);
                    if v < current && best.is_none_or(|b| v < b.0) {
                        best = Some((v, p, q, true));
                    }
                }
            }
        }
        let Some((_, p, target, is_swap)) = best else { break };
        if is_swap {
            let (a, b) = (state.assignment[p], state.assignment[target]);
            state.apply_move(p, b);
            state.apply_move(target, a);
        } else {
            state.apply_move(p, target);
        }
        // Recompute rather than trust the incremental penalty.
        current = state.penalty();
        moves += 1;
    }
    (current, state.assignment)
}

/// One dimension of a parameter grid: candidate target fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Grid {
    Fixed(f64),
    /// `{ i·step : 0 ≤ i ≤ max_index }`.
    Uniform {
        step: f64,
        max_index: u32,
    },
}

impl Grid {
    /// Indices whose value lies within `slack` of `x`.
    fn matches(self, x: f64, slack: f64) -> std::ops::RangeInclusive<u32> {
        let s = slack + FRACTION_TOL;
        match self {
            Grid::Fixed(v) => {
                if (x - v).abs() <= s {
                    0..=0
                } else {
                    #[allow(clippy::reversed_empty_ranges)]
                    {
                        1..=0
                    }
                }
            }
            Grid::Uniform { step, max_index } => {
                let lo = ((x - s) / step).ceil().max(0.0);
                let hi = ((x + s) / step).floor().min(max_index as f64);
                if hi < lo {
                    #[allow(clippy::reversed_empty_ranges)]
                    {
                        1..=0
                    }
                } else {
                    (lo as u32)..=(hi as u32)
                }
            }
        }
    }

    fn max_value(self) -> f64 {
        match self {
            Grid::Fixed(v) => v,
            Grid::Uniform { step, max_index } => step * max_index as f64,
        }
    }

    fn min_value(self) -> f64 {
        match self {
            Grid::Fixed(v) => v,
            Grid::Uniform { .. } => 0.0,
        }
    }

    pub(crate) fn value(self, index: u32) -> f64 {
        match self {
            Grid::Fixed(v) => v,
            Grid::Uniform { step, .. } => step * index as f64,
        }
    }

    pub(crate) fn len(self) -> u64 {
        match self {
            Grid::Fixed(_) => 1,
            Grid::Uniform { max_index, .. } => max_index as u64 + 1,
        }
    }
}

/// Grid of specs with exact (`λ_LB = λ_UB`, `μ_LB = μ_UB`) targets: one size
/// grid per part and one weight grid shared by every unordered pair of
/// distinct parts.
#[derive(Debug, Clone)]
pub(crate) struct SpecGrid {
    pub sizes: Vec<Grid>,
    pub weights: Grid,
    pub slack: f64,
}

impl SpecGrid {
    pub(crate) fn parts(&self) -> usize {
        self.sizes.len()
    }

    pub(crate) fn cell_count(&self) -> u64 {
        let k = self.parts() as u64;
        let pairs = k * (k.saturating_sub(1)) / 2;
        let mut total: u64 = 1;
        for g in &self.sizes {
            total = total.saturating_mul(g.len());
        }
        for _ in 0..pairs {
            total = total.saturating_mul(self.weights.len());
        }
        total
    }

    /// Spec of one cell: `sizes[j]` and `weights[pair]` are grid indices,
    /// pairs ordered `(0,1), (0,2), ..., (1,2), ...`.
    pub(crate) fn spec(&self, sizes: &[u32], weights: &[u32]) -> PartitionSpec {
        let k = self.parts();
        let size_bounds = self.sizes.iter().zip(sizes).map(|(g, &i)| (g.value(i), g.value(i))).collect();
        let mut weight_bounds = Vec::new();
        let mut t = 0;
        for j in 0..k {
            for l in (j + 1)..k {
                let v = self.weights.value(weights[t]);
                weight_bounds.push(WeightBound { parts: (j, l), lower: v, upper: v });
                t += 1;
            }
        }
        PartitionSpec { k, size_bounds, weight_bounds }
    }

    /// For every cell, the partition an exhaustive [`search_partition`] call
    /// would return is the lexicographically first feasible assignment. One
    /// lexicographic sweep finds all of them at once: an assignment is kept
    /// iff it is the first to satisfy some cell. Returned in sweep order.
    pub(crate) fn first_hits(&self, m: &Metric) -> Vec<Vec<usize>> {
        let k = self.parts();
        let n = m.n() as f64;
        let scale = n * n * m.diameter();
        let slack = self.slack;
        let min_size =
            self.sizes.iter().map(|g| ((g.min_value() - slack - FRACTION_TOL) * n).ceil().max(0.0) as usize).collect();
        let max_size =
            self.sizes.iter().map(|g| ((g.max_value() + slack + FRACTION_TOL) * n).floor() as usize).collect();
        let en = Enumeration::new(m, min_size, max_size);
        let mut claimed: HashSet<Vec<u32>> = HashSet::new();
        let mut hits = Vec::new();
        en.run(|assignment, sizes, crossing| {
            let mut ranges = Vec::with_capacity(k + k * k / 2);
            for (j, g) in self.sizes.iter().enumerate() {
                let r = g.matches(sizes[j] as f64 / n, slack);
                if r.is_empty() {
                    return ControlFlow::Continue(());
                }
                ranges.push(r);
            }
            for j in 0..k {
                for l in (j + 1)..k {
                    let frac = if scale > 0.0 { crossing[j * k + l] / scale } else { 0.0 };
                    let r = self.weights.matches(frac, slack);
                    if r.is_empty() {
                        return ControlFlow::Continue(());
                    }
                    ranges.push(r);
                }
            }
            let mut is_first = false;
            let mut cell: Vec<u32> = ranges.iter().map(|r| *r.start()).collect();
            loop {
                if claimed.insert(cell.clone()) {
                    is_first = true;
                }
                // Odometer over the cartesian product of matching indices.
                let mut d = 0;
                loop {
                    if d == cell.len() {
                        if is_first {
                            hits.push(assignment.to_vec());
                        }
                        return ControlFlow::Continue(());
                    }
                    if cell[d] < *ranges[d].end() {
                        cell[d] += 1;
                        break;
                    }
                    cell[d] = *ranges[d].start();
                    d += 1;
                }
            }
        });
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Metric {
        let mut rows = vec![vec![1.0; n]; n];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 0.0;
        }
        Metric::from_rows(&rows).unwrap()
    }

    fn two_triangles() -> Metric {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| match (i == j, (i < 3) == (j < 3)) {
                        (true, _) => 0.0,
                        (false, true) => 0.1,
                        (false, false) => 1.0,
                    })
                    .collect()
            })
            .collect();
        Metric::from_rows(&rows).unwrap()
    }

    fn balanced(k: usize, weights: Vec<WeightBound>) -> PartitionSpec {
        PartitionSpec { k, size_bounds: vec![(1.0 / k as f64, 1.0 / k as f64); k], weight_bounds: weights }
    }

    #[test]
    fn uniform_balanced_split() {
        let m = uniform(4);
        let spec = balanced(2, vec![WeightBound { parts: (0, 1), lower: 0.25, upper: 0.25 }]);
        let part = search_partition(&m, &spec, 0.0, &SearchBudget::default(), 0).unwrap().found().unwrap();
        assert_eq!(part.part_sizes, vec![2, 2]);
        assert_eq!(part.crossing_weights[0][1], 4.0);
        assert_eq!(part.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn two_clusters_found_by_crossing_bound() {
        let m = two_triangles();
        // 9 cross pairs at distance 1: W = 9, n²D = 36.
        let spec = balanced(2, vec![WeightBound { parts: (0, 1), lower: 0.25, upper: 1.0 }]);
        let part = search_partition(&m, &spec, 0.0, &SearchBudget::default(), 0).unwrap().found().unwrap();
        assert_eq!(part.assignment, vec![0, 0, 0, 1, 1, 1]);

        // Brute-force all 2^6 labelings: only the two cluster splits reach W = 9.
        let mut feasible = Vec::new();
        for mask in 0u32..64 {
            let a: Vec<usize> = (0..6).map(|i| ((mask >> i) & 1) as usize).collect();
            let p = Partition::from_assignment(&m, 2, a.clone());
            if p.part_sizes == vec![3, 3] && p.crossing_weights[0][1] >= 9.0 - 1e-12 {
                feasible.push(a);
            }
        }
        assert_eq!(feasible.len(), 2);
        assert!(feasible.contains(&part.assignment));
    }

    #[test]
    fn trivially_infeasible_specs() {
        let m = uniform(4);
        let spec = PartitionSpec { k: 2, size_bounds: vec![(1.0, 1.0), (1.0, 1.0)], weight_bounds: vec![] };
        assert!(matches!(
            search_partition(&m, &spec, 0.01, &SearchBudget::default(), 0),
            Err(PartitionError::SpecInfeasibleTrivially { .. })
        ));
        let spec = PartitionSpec { k: 2, size_bounds: vec![(0.1, 0.2), (0.1, 0.2)], weight_bounds: vec![] };
        assert!(matches!(
            search_partition(&m, &spec, 0.01, &SearchBudget::default(), 0),
            Err(PartitionError::SpecInfeasibleTrivially { .. })
        ));
        // Per-part slack can close a gap in the sums.
        let m = uniform(6);
        let spec = PartitionSpec { k: 3, size_bounds: vec![(0.36, 0.4); 3], weight_bounds: vec![] };
        let found = search_partition(&m, &spec, 0.04, &SearchBudget::default(), 0).unwrap().found().unwrap();
        assert_eq!(found.part_sizes, vec![2, 2, 2]);
    }

    #[test]
    fn invalid_specs() {
        let m = uniform(3);
        let spec = PartitionSpec { k: 4, size_bounds: vec![(0.0, 1.0); 4], weight_bounds: vec![] };
        assert!(matches!(
            search_partition(&m, &spec, 0.1, &SearchBudget::default(), 0),
            Err(PartitionError::InvalidSpec(_))
        ));
        let spec = PartitionSpec { k: 2, size_bounds: vec![(0.6, 0.4), (0.0, 1.0)], weight_bounds: vec![] };
        assert!(spec.validate().is_err());
        let spec = balanced(2, vec![]);
        assert!(matches!(
            search_partition(&m, &spec, -1.0, &SearchBudget::default(), 0),
            Err(PartitionError::InvalidSlack(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let spec = balanced(2, vec![WeightBound { parts: (0, 1), lower: 0.1, upper: 0.3 }]);
        let back = PartitionSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        assert!(PartitionSpec::from_json("{\"k\": 2}").is_err());
    }

    #[test]
    fn local_search_regime_finds_cluster_split() {
        let m = two_triangles();
        let spec = balanced(2, vec![WeightBound { parts: (0, 1), lower: 0.25, upper: 1.0 }]);
        let budget = SearchBudget { exhaustive_n: 0, ..SearchBudget::default() };
        let part = search_partition(&m, &spec, 0.0, &budget, 7).unwrap().found().unwrap();
        let mut sides = part.assignment.clone();
        sides.dedup();
        assert_eq!(sides.len(), 2, "{:?}", part.assignment);
        assert_eq!(part.crossing_weights[0][1], 9.0);
    }

    #[test]
    fn first_hits_match_per_cell_search() {
        let m = two_triangles();
        let grid = SpecGrid {
            sizes: vec![Grid::Fixed(0.5), Grid::Fixed(0.5)],
            weights: Grid::Uniform { step: 0.05, max_index: 6 },
            slack: 0.05,
        };
        let budget = SearchBudget::default();
        let mut naive: Vec<Vec<usize>> = Vec::new();
        for i in 0..=6 {
            let spec = grid.spec(&[0, 0], &[i]);
            if let SearchOutcome::Found(p) = search_partition(&m, &spec, grid.slack, &budget, 0).unwrap() {
                if !naive.contains(&p.assignment) {
                    naive.push(p.assignment);
                }
            }
        }
        let mut swept = grid.first_hits(&m);
        naive.sort();
        swept.sort();
        assert_eq!(naive, swept);
        assert!(!swept.is_empty());
    }
}
