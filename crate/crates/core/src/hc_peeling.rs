//! Recursive peeling for maximum hierarchical clustering.
//!
//! Each level either hands a dense instance to [`solve_hc_dense`], or hangs
//! everything outside the core as a ladder above a tree for the core.

use serde::{Deserialize, Serialize};

use crate::hc_dense::{solve_hc_dense, DenseHcConfig};
use crate::la_peeling::{blank_record, check_config, default_max_depth, Level, PeelError};
use crate::metric::{find_core, full_stats, Density, Metric};
use crate::objectives::{evaluate_hc, ladder_tree, HcTree};
use crate::trace::{Case, LevelRecord, RecursionTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HcPeelConfig {
    pub eps: f64,
    pub dense: DenseHcConfig,
    /// `None` uses `4·log₂(n) + 8`.
    pub max_depth: Option<usize>,
}

impl HcPeelConfig {
    pub fn new(eps: f64) -> Self {
        HcPeelConfig { eps, dense: DenseHcConfig::new(eps), max_depth: None }
    }
}

/// One peeling step on a sparse instance. Indices are local to the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct HcLayer {
    pub rho: f64,
    /// Ascending.
    pub core: Vec<usize>,
    /// Everything outside the core, ascending.
    pub a: Vec<usize>,
    pub core_diameter: f64,
    pub w_a: f64,
    pub w_ac: f64,
    pub w_c: f64,
}

/// The layer a sparse level would peel; `None` when `ρ ≥ ε²` or the density
/// is dense by convention.
pub fn hc_layer(m: &Metric, eps: f64) -> Option<HcLayer> {
    let rho = match full_stats(m).density {
        Density::Value(r) if r < eps * eps => r,
        _ => return None,
    };
    let core = find_core(m).expect("positive diameter").core;
    let mut in_core = vec![false; m.n()];
    for &c in &core {
        in_core[c] = true;
    }
    let a: Vec<usize> = (0..m.n()).filter(|&v| !in_core[v]).collect();
    Some(HcLayer {
        rho,
        core_diameter: m.diameter_of(&core),
        w_a: m.weight_within(&a),
        w_ac: m.weight_between(&a, &core),
        w_c: m.weight_within(&core),
        core,
        a,
    })
}

pub fn solve_hc(m: &Metric, cfg: &HcPeelConfig) -> Result<(HcTree, RecursionTrace), PeelError> {
    check_config(cfg.eps, cfg.max_depth)?;
    let eps = cfg.eps;
    let max_depth = cfg.max_depth.unwrap_or_else(|| default_max_depth(m.n()));
    let mut levels: Vec<LevelRecord> = Vec::new();
    // Per level: its point set and the ladder of peeled points.
    let mut ladders: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut lv = Level::top(m);

    let bottom = loop {
        if levels.len() == max_depth {
            return Err(PeelError::DepthExceeded { max_depth });
        }
        let level = levels.len();
        let stats = full_stats(&lv.sub);
        if stats.density.at_least(eps * eps) {
            let t = solve_hc_dense(&lv.sub, &cfg.dense)?;
            levels.push(blank_record(level, &lv, Case::A));
            ladders.push((lv.ids.clone(), Vec::new()));
            break t.relabel(&lv.ids);
        }
        let layer = hc_layer(&lv.sub, eps).expect("sparse level");
        let n = lv.ids.len();
        let sq = layer.rho.sqrt();
        let (w_a, w_ac) = (layer.w_a, layer.w_ac);
        let case = if layer.w_c < 16.0 * eps * stats.weight_sum { Case::B } else { Case::C };
        let mut rec = blank_record(level, &lv, case);
        rec.a_size = layer.a.len();
        rec.c_size = layer.core.len();
        rec.core_diameter = Some(layer.core_diameter);
        rec.w_a = Some(w_a);
        rec.w_ab = Some(0.0);
        rec.w_ac = Some(w_ac);
        rec.w_rest = Some(layer.w_c);
        rec.alpha = Some(n as f64 * (w_a + w_ac) * (1.0 - sq));
        rec.beta = Some(n as f64 * (w_a + w_ac));
        rec.gamma = Some(1.0 + 2.0 * sq);
        rec.peeled = lv.global(&layer.a);
        rec.core = lv.global(&layer.core);
        levels.push(rec);
        ladders.push((lv.ids.clone(), lv.global(&layer.a)));

        if case == Case::B {
            break ladder_tree(&lv.global(&layer.core), None).expect("nonempty core");
        }
        lv = lv.narrow(&layer.core);
    };

    let mut tree = bottom;
    for (rec, (ids, peeled)) in levels.iter_mut().zip(ladders).rev() {
        tree = ladder_tree(&peeled, Some(tree)).expect("disjoint levels");
        rec.value = level_value(m, &ids, &tree);
    }
    Ok((tree, RecursionTrace { levels }))
}

/// Value of `t` (leaves in top-level ids, exactly `ids`) on its submetric.
fn level_value(m: &Metric, ids: &[usize], t: &HcTree) -> f64 {
    let mut local = vec![usize::MAX; m.n()];
    for (i, &p) in ids.iter().enumerate() {
        local[p] = i;
    }
    evaluate_hc(&m.submetric(ids), &t.relabel(&local)).expect("tree spans the level")
}
