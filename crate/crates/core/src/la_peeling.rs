//! Recursive peeling for maximum linear arrangement.
//!
//! Each level either hands a dense instance to [`solve_la_dense`], or finds
//! the core, puts every point at distance `≥ ε²·D` from it in the leftmost
//! free slots, and continues on what is left.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::la_dense::{solve_la_dense, DenseLaConfig};
use crate::metric::{find_core, full_stats, Density, Metric};
use crate::objectives::LinearArrangement;
use crate::search::{check_eps, DenseError};
use crate::trace::{Case, LevelRecord, RecursionTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeelError {
    #[error("eps must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("max_depth must be at least 1")]
    InvalidDepth,
    #[error("recursion exceeded {max_depth} levels")]
    DepthExceeded { max_depth: usize },
    #[error(transparent)]
    Dense(#[from] DenseError),
}

/// Default recursion cap: `4·log₂(n) + 8`.
pub fn default_max_depth(n: usize) -> usize {
    (4.0 * (n.max(1) as f64).log2()).floor() as usize + 8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaPeelConfig {
    pub eps: f64,
    pub dense: DenseLaConfig,
    /// `None` uses [`default_max_depth`].
    pub max_depth: Option<usize>,
}

impl LaPeelConfig {
    pub fn new(eps: f64) -> Self {
        LaPeelConfig { eps, dense: DenseLaConfig::new(eps), max_depth: None }
    }
}

/// Submetric on `ids` (ascending, top-level numbering) and its level data.
pub(crate) struct Level {
    pub ids: Vec<usize>,
    pub sub: Metric,
}

impl Level {
    pub fn top(m: &Metric) -> Self {
        Level { ids: (0..m.n()).collect(), sub: m.clone() }
    }

    pub fn narrow(&self, local: &[usize]) -> Self {
        Level { ids: local.iter().map(|&i| self.ids[i]).collect(), sub: self.sub.submetric(local) }
    }

    pub fn global(&self, local: &[usize]) -> Vec<usize> {
        local.iter().map(|&i| self.ids[i]).collect()
    }
}

pub(crate) fn check_config(eps: f64, max_depth: Option<usize>) -> Result<(), PeelError> {
    check_eps(eps).map_err(|_| PeelError::InvalidEps(eps))?;
    if max_depth == Some(0) {
        return Err(PeelError::InvalidDepth);
    }
    Ok(())
}

pub(crate) fn blank_record(level: usize, lv: &Level, case: Case) -> LevelRecord {
    let stats = full_stats(&lv.sub);
    LevelRecord {
        level,
        n: lv.ids.len(),
        density: stats.density.value(),
        case,
        a_size: 0,
        b_size: 0,
        c_size: 0,
        diameter: stats.diameter,
        weight: stats.weight_sum,
        value: 0.0,
        core_diameter: None,
        w_a: None,
        w_ab: None,
        w_ac: None,
        w_rest: None,
        alpha: None,
        beta: None,
        gamma: None,
        peeled: Vec::new(),
        core: Vec::new(),
    }
}

/// One peeling step on a sparse instance. Indices are local to the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct LaLayer {
    pub rho: f64,
    /// Ascending.
    pub core: Vec<usize>,
    /// Points at distance `≥ ε²·D` from every core point, ascending.
    pub a: Vec<usize>,
    /// Neither in `a` nor in the core.
    pub b: Vec<usize>,
    /// Everything outside `a`, ascending.
    pub rest: Vec<usize>,
    pub core_diameter: f64,
    pub w_a: f64,
    pub w_ab: f64,
    pub w_ac: f64,
    pub w_rest: f64,
}

/// The layer a sparse level would peel; `None` when `ρ ≥ ε⁶` or the density
/// is dense by convention.
pub fn la_layer(m: &Metric, eps: f64) -> Option<LaLayer> {
    let stats = full_stats(m);
    let rho = match stats.density {
        Density::Value(r) if r < eps.powi(6) => r,
        _ => return None,
    };
    let n = m.n();
    let core = find_core(m).expect("positive diameter").core;
    let mut in_core = vec![false; n];
    for &c in &core {
        in_core[c] = true;
    }
    let cut = eps * eps * stats.diameter;
    let (mut a, mut b, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for (v, &inside) in in_core.iter().enumerate() {
        let row = m.row(v);
        let nearest = core.iter().map(|&c| row[c]).fold(f64::INFINITY, f64::min);
        if nearest >= cut {
            a.push(v);
        } else {
            rest.push(v);
            if !inside {
                b.push(v);
            }
        }
    }
    Some(LaLayer {
        rho,
        core_diameter: m.diameter_of(&core),
        w_a: m.weight_within(&a),
        w_ab: m.weight_between(&a, &b),
        w_ac: m.weight_between(&a, &core),
        w_rest: m.weight_within(&rest),
        core,
        a,
        b,
        rest,
    })
}

pub fn solve_la(m: &Metric, cfg: &LaPeelConfig) -> Result<(LinearArrangement, RecursionTrace), PeelError> {
    check_config(cfg.eps, cfg.max_depth)?;
    let eps = cfg.eps;
    let max_depth = cfg.max_depth.unwrap_or_else(|| default_max_depth(m.n()));
    let mut order: Vec<usize> = Vec::with_capacity(m.n());
    let mut levels: Vec<LevelRecord> = Vec::new();
    let mut lv = Level::top(m);

    loop {
        if levels.len() == max_depth {
            return Err(PeelError::DepthExceeded { max_depth });
        }
        let level = levels.len();
        let stats = full_stats(&lv.sub);
        if stats.density.at_least(eps.powi(6)) {
            let y = solve_la_dense(&lv.sub, &cfg.dense)?;
            order.extend(lv.global(&y.order()));
            levels.push(blank_record(level, &lv, Case::A));
            break;
        }
        let layer = la_layer(&lv.sub, eps).expect("sparse level");
        let n = lv.ids.len();
        let sq = layer.rho.sqrt();
        let case = if layer.w_rest < eps * stats.weight_sum { Case::B } else { Case::C };
        let mut rec = blank_record(level, &lv, case);
        let w_ac = layer.w_ac;
        rec.a_size = layer.a.len();
        rec.b_size = layer.b.len();
        rec.c_size = layer.core.len();
        rec.core_diameter = Some(layer.core_diameter);
        rec.w_a = Some(layer.w_a);
        rec.w_ab = Some(layer.w_ab);
        rec.w_ac = Some(w_ac);
        rec.w_rest = Some(layer.w_rest);
        rec.alpha = Some(0.5 * n as f64 * w_ac * (1.0 - 5.0 * sq / (eps * eps)));
        rec.beta = Some(0.5 * n as f64 * w_ac * (1.0 + 13.0 * sq / (eps * eps)));
        rec.gamma = Some(1.0 + 4.0 * sq);
        rec.peeled = lv.global(&layer.a);
        rec.core = lv.global(&layer.core);
        levels.push(rec);

        order.extend(lv.global(&layer.a));
        if case == Case::B {
            order.extend(lv.global(&layer.rest));
            break;
        }
        lv = lv.narrow(&layer.rest);
    }

    // Each level's own arrangement is the suffix of the final order that
    // starts at its first slot.
    let mut offset = 0;
    for rec in levels.iter_mut() {
        rec.value = suffix_value(m, &order[offset..]);
        offset += rec.a_size;
    }
    let y = LinearArrangement::from_order(&order).expect("every point placed once");
    Ok((y, RecursionTrace { levels }))
}

fn suffix_value(m: &Metric, order: &[usize]) -> f64 {
    let mut total = 0.0;
    for (s, &p) in order.iter().enumerate() {
        let row = m.row(p);
        for (t, &q) in order.iter().enumerate().skip(s + 1) {
            total += row[q] * (t - s) as f64;
        }
    }
    total
}
