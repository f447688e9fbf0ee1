#![allow(dead_code)]

use multipeel::instances::{generate, Family, GeneratorSpec};
use multipeel::metric::Metric;
use multipeel::objectives::{HcTree, LinearArrangement, Node};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum over unordered pairs of `d(p, q)·|slot(p) − slot(q)|`, from the order.
pub fn la_pairs(m: &Metric, order: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &p) in order.iter().enumerate() {
        for (j, &q) in order.iter().enumerate().skip(i + 1) {
            total += m.get(p, q) * (j - i) as f64;
        }
    }
    total
}

pub fn la_value(m: &Metric, y: &LinearArrangement) -> f64 {
    la_pairs(m, &y.order())
}

/// Parent pointer and subtree leaf count per arena node, plus `(point, node)`
/// for every leaf.
type Arena = (Vec<Option<usize>>, Vec<usize>, Vec<(usize, usize)>);

fn parents(t: &HcTree) -> Arena {
    let nodes = t.nodes();
    let mut parent = vec![None; nodes.len()];
    let mut size = vec![0; nodes.len()];
    let mut leaf_node = Vec::new();
    for (v, nd) in nodes.iter().enumerate() {
        match *nd {
            Node::Leaf(p) => {
                size[v] = 1;
                leaf_node.push((p, v));
            }
            Node::Internal(l, r) => {
                parent[l] = Some(v);
                parent[r] = Some(v);
                size[v] = size[l] + size[r];
            }
        }
    }
    (parent, size, leaf_node)
}

/// Sum over unordered pairs of `d(p, q)·|leaves(lca(p, q))|`, by walking
/// ancestor chains.
pub fn hc_value(m: &Metric, t: &HcTree) -> f64 {
    hc_pairs(m, t, |_, _| true)
}

/// Like `hc_value`, restricted to pairs accepted by `keep`.
pub fn hc_pairs(m: &Metric, t: &HcTree, keep: impl Fn(usize, usize) -> bool) -> f64 {
    let (parent, size, leaf_node) = parents(t);
    let ancestors = |mut v: usize| {
        let mut chain = vec![v];
        while let Some(p) = parent[v] {
            chain.push(p);
            v = p;
        }
        chain
    };
    let mut total = 0.0;
    for (i, &(p, vp)) in leaf_node.iter().enumerate() {
        let up = ancestors(vp);
        for &(q, vq) in &leaf_node[i + 1..] {
            if !keep(p, q) {
                continue;
            }
            let mut v = vq;
            while !up.contains(&v) {
                v = parent[v].unwrap();
            }
            total += m.get(p, q) * size[v] as f64;
        }
    }
    total
}

/// Uniformly random merge order over `ids`.
pub fn random_tree(ids: &[usize], rng: &mut ChaCha8Rng) -> HcTree {
    let mut pool: Vec<HcTree> = ids.iter().map(|&p| HcTree::leaf(p)).collect();
    while pool.len() > 1 {
        let i = rng.random_range(0..pool.len());
        let a = pool.swap_remove(i);
        let j = rng.random_range(0..pool.len());
        let b = pool.swap_remove(j);
        pool.push(HcTree::join(a, b));
    }
    pool.pop().expect("nonempty ids")
}

pub fn random_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Symmetric random weights in `[lo, 1]`; any such matrix with `lo ≥ 1/2`
/// satisfies the triangle inequality.
pub fn random_metric(n: usize, lo: f64, rng: &mut ChaCha8Rng) -> Metric {
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rng.random_range(lo..=1.0);
            flat[i * n + j] = d;
            flat[j * n + i] = d;
        }
    }
    Metric::from_flat(n, &flat).unwrap()
}

/// One family per index, with parameters varied by `salt`.
pub fn family(index: usize, n: usize, salt: u64) -> Family {
    let f = (salt % 7) as f64;
    match index % 7 {
        0 => Family::EuclideanGaussian,
        1 => Family::EuclideanUniformBox,
        2 => Family::Clustered { clusters: (2 + salt as usize % 2).min(n), intra: 0.05 + 0.05 * f, inter: 1.0 },
        3 => Family::UniformMetric,
        4 => Family::PathMetric,
        5 => {
            let outlier_n = 1 + (salt as usize % 2).min(n / 2);
            Family::ClusterPlusOutliers { core_n: n - outlier_n, outlier_n, ratio: 0.01 + 0.1 * f }
        }
        _ => Family::Nested { levels: 2, outliers_per_level: 1.min(n / 2), ratio: 0.2 + 0.1 * f },
    }
}

/// Generated instances covering every family, `n` cycling through `ns`.
pub fn corpus(count: usize, ns: &[usize], seed: u64) -> Vec<(String, Metric)> {
    (0..count)
        .map(|i| {
            let n = ns[i % ns.len()];
            let s = seed + i as u64;
            let spec = GeneratorSpec { family: family(i, n, s), n, dim: 1 + (i % 3), seed: s };
            (format!("{}-n{n}-s{s}", spec.family.name()), generate(&spec).unwrap())
        })
        .collect()
}
