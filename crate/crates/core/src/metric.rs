//! Validated finite metrics, subset statistics and core detection.
//!
//! Weights follow the unordered-pair convention: `W_U` sums each pair
//! `{i, j} ⊆ U` once, while the weighted density keeps the `n_U²` denominator,
//! so `0 ≤ ρ_U ≤ 1/2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack (times the diameter) admitted by symmetry and triangle checks.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("distance matrix is empty")]
    Empty,
    #[error("row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("non-finite distance at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("negative distance {value} at ({i}, {j})")]
    NegativeDistance { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal entry {value} at ({i}, {i})")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("asymmetric matrix: d[{i}][{j}] = {forward} but d[{j}][{i}] = {backward}")]
    AsymmetricMatrix { i: usize, j: usize, forward: f64, backward: f64 },
    #[error("triangle inequality violated: d[{i}][{j}] > d[{i}][{k}] + d[{k}][{j}]")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("subset is empty")]
    EmptySubset,
    #[error("point {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("point {0} appears twice in the subset")]
    DuplicateIndex(usize),
    #[error("all points coincide (zero diameter)")]
    ZeroDiameter,
}

/// A symmetric, zero-diagonal, nonnegative distance matrix satisfying the
/// triangle inequality up to [`TRIANGLE_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    n: usize,
    dist: Vec<f64>,
}

impl Metric {
    /// Validates a square matrix given as rows. The strict upper triangle is
    /// mirrored into the stored matrix so the result is exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MetricError> {
        let n = rows.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare { row, len: r.len(), n });
            }
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_flat(n, &flat)
    }

    /// Validates a row-major `n × n` matrix.
    pub fn from_flat(n: usize, raw: &[f64]) -> Result<Self, MetricError> {
        let m = Self::from_flat_unchecked_triangle(n, raw)?;
        m.check_triangle()?;
        Ok(m)
    }

    /// Runs every check except the cubic triangle scan. Used by generators
    /// whose constructions are metrics by design at sizes where the scan
    /// would dominate.
    pub(crate) fn from_flat_unchecked_triangle(n: usize, raw: &[f64]) -> Result<Self, MetricError> {
        if n == 0 {
            return Err(MetricError::Empty);
        }
        if raw.len() != n * n {
            return Err(MetricError::NotSquare { row: raw.len() / n, len: raw.len() % n, n });
        }
        for i in 0..n {
            for j in 0..n {
                let v = raw[i * n + j];
                if !v.is_finite() {
                    return Err(MetricError::NonFinite { i, j });
                }
                if v < 0.0 {
                    return Err(MetricError::NegativeDistance { i, j, value: v });
                }
            }
        }
        for i in 0..n {
            let v = raw[i * n + i];
            if v != 0.0 {
                return Err(MetricError::NonzeroDiagonal { i, value: v });
            }
        }
        let diameter = raw.iter().copied().fold(0.0, f64::max);
        let tol = TRIANGLE_TOLERANCE * diameter;
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let forward = raw[i * n + j];
                let backward = raw[j * n + i];
                if (forward - backward).abs() > tol {
                    return Err(MetricError::AsymmetricMatrix { i, j, forward, backward });
                }
                dist[i * n + j] = forward;
                dist[j * n + i] = forward;
            }
        }
        Ok(Metric { n, dist })
    }

    fn check_triangle(&self) -> Result<(), MetricError> {
        let n = self.n;
        let tol = TRIANGLE_TOLERANCE * self.diameter();
        for i in 0..n {
            let ri = self.row(i);
            for j in (i + 1)..n {
                let rj = self.row(j);
                let dij = ri[j];
                // d[k][j] = d[j][k], so both rows are scanned contiguously.
                let mut best = f64::INFINITY;
                let mut arg = 0;
                for (k, (a, b)) in ri.iter().zip(rj).enumerate() {
                    let s = a + b;
                    if s < best {
                        best = s;
                        arg = k;
                    }
                }
                if dij > best + tol {
                    return Err(MetricError::TriangleViolation { i, j, k: arg });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// `W_V`: sum over unordered pairs.
    pub fn total_weight(&self) -> f64 {
        let mut w = 0.0;
        for i in 0..self.n {
            w += self.row(i)[i + 1..].iter().sum::<f64>();
        }
        w
    }

    /// Metric induced on `ids`; local index `t` corresponds to `ids[t]`.
    pub fn submetric(&self, ids: &[usize]) -> Metric {
        let k = ids.len();
        let mut dist = Vec::with_capacity(k * k);
        for &a in ids {
            let r = self.row(a);
            dist.extend(ids.iter().map(|&b| r[b]));
        }
        Metric { n: k, dist }
    }

    /// `W_U` for a set of points (no validation).
    pub fn weight_within(&self, ids: &[usize]) -> f64 {
        let mut w = 0.0;
        for (t, &a) in ids.iter().enumerate() {
            let r = self.row(a);
            w += ids[t + 1..].iter().map(|&b| r[b]).sum::<f64>();
        }
        w
    }

    /// `W_{U,U'}` for disjoint sets.
    pub fn weight_between(&self, left: &[usize], right: &[usize]) -> f64 {
        left.iter()
            .map(|&a| {
                let r = self.row(a);
                right.iter().map(|&b| r[b]).sum::<f64>()
            })
            .sum()
    }

    pub fn diameter_of(&self, ids: &[usize]) -> f64 {
        let mut d: f64 = 0.0;
        for (t, &a) in ids.iter().enumerate() {
            let r = self.row(a);
            for &b in &ids[t + 1..] {
                d = d.max(r[b]);
            }
        }
        d
    }
}

/// Weighted density of a subset. Zero-diameter subsets have no finite
/// density and are treated as dense by every threshold test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Density {
    Value(f64),
    DenseByConvention,
}

impl Density {
    pub fn at_least(self, threshold: f64) -> bool {
        match self {
            Density::Value(v) => v >= threshold,
            Density::DenseByConvention => true,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Density::Value(v) => Some(v),
            Density::DenseByConvention => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetStats {
    pub indices: Vec<usize>,
    pub diameter: f64,
    pub weight_sum: f64,
    pub size: usize,
    pub density: Density,
}

pub fn subset_stats(m: &Metric, subset: &[usize]) -> Result<SubsetStats, MetricError> {
    if subset.is_empty() {
        return Err(MetricError::EmptySubset);
    }
    let mut seen = vec![false; m.n()];
    for &p in subset {
        if p >= m.n() {
            return Err(MetricError::IndexOutOfRange(p));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(MetricError::DuplicateIndex(p));
        }
    }
    Ok(stats_unchecked(m, subset))
}

pub(crate) fn stats_unchecked(m: &Metric, subset: &[usize]) -> SubsetStats {
    let size = subset.len();
    let mut diameter: f64 = 0.0;
    let mut weight_sum = 0.0;
    for (t, &a) in subset.iter().enumerate() {
        let r = m.row(a);
        for &b in &subset[t + 1..] {
            let d = r[b];
            weight_sum += d;
            diameter = diameter.max(d);
        }
    }
    let density = if diameter > 0.0 {
        Density::Value(weight_sum / ((size * size) as f64 * diameter))
    } else {
        Density::DenseByConvention
    };
    SubsetStats { indices: subset.to_vec(), diameter, weight_sum, size, density }
}

/// Stats over every point of `m`.
pub fn full_stats(m: &Metric) -> SubsetStats {
    let all: Vec<usize> = (0..m.n()).collect();
    stats_unchecked(m, &all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreResult {
    /// Ascending point ids.
    pub core: Vec<usize>,
    pub center: usize,
    pub stats: SubsetStats,
}

/// Largest ball of radius `2·D_V·√ρ_V` over all centers (ties to the smallest
/// center). Its diameter is at most `4·D_V·√ρ_V` by the triangle inequality,
/// and a counting argument over incident weights shows some center captures
/// at least `n·(1 − √ρ_V)` points.
pub fn find_core(m: &Metric) -> Result<CoreResult, MetricError> {
    let all = full_stats(m);
    let rho = match all.density {
        Density::Value(r) => r,
        Density::DenseByConvention => return Err(MetricError::ZeroDiameter),
    };
    let radius = 2.0 * all.diameter * rho.sqrt();
    let n = m.n();
    let (center, _) = (0..n)
        .map(|v| (v, m.row(v).iter().filter(|&&d| d <= radius).count()))
        .fold((0, 0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let core: Vec<usize> = m.row(center).iter().enumerate().filter(|(_, &d)| d <= radius).map(|(u, _)| u).collect();
    let stats = stats_unchecked(m, &core);
    Ok(CoreResult { core, center, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_point() -> Metric {
        let mut rows = vec![vec![0.1; 5]; 5];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 0.0;
            r[4] = 1.0;
        }
        rows[4] = vec![1.0, 1.0, 1.0, 1.0, 0.0];
        Metric::from_rows(&rows).unwrap()
    }

    #[test]
    fn smallest_metric_validates() {
        let m = Metric::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.n(), 2);
    }

    #[test]
    fn triangle_violation_reports_witness() {
        let err = Metric::from_rows(&[vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]]).unwrap_err();
        assert_eq!(err, MetricError::TriangleViolation { i: 0, j: 2, k: 1 });
    }

    #[test]
    fn triangle_equality_is_accepted() {
        Metric::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]).unwrap();
    }

    #[test]
    fn rejects_malformed_matrices() {
        assert!(matches!(
            Metric::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]),
            Err(MetricError::AsymmetricMatrix { .. })
        ));
        assert!(matches!(
            Metric::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]),
            Err(MetricError::NegativeDistance { .. })
        ));
        assert!(matches!(
            Metric::from_rows(&[vec![0.5, 1.0], vec![1.0, 0.0]]),
            Err(MetricError::NonzeroDiagonal { i: 0, .. })
        ));
        assert!(matches!(Metric::from_rows(&[vec![0.0, 1.0], vec![1.0]]), Err(MetricError::NotSquare { row: 1, .. })));
        assert_eq!(Metric::from_rows(&[]), Err(MetricError::Empty));
        assert!(matches!(
            Metric::from_rows(&[vec![0.0, f64::NAN], vec![f64::NAN, 0.0]]),
            Err(MetricError::NonFinite { .. })
        ));
    }

    #[test]
    fn float_noise_within_tolerance_is_symmetrized() {
        let m = Metric::from_rows(&[vec![0.0, 1.0], vec![1.0 + 1e-12, 0.0]]).unwrap();
        assert_eq!(m.get(1, 0), m.get(0, 1));
    }

    #[test]
    fn uniform_stats() {
        let m = Metric::from_rows(&[
            vec![0.0, 1.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let s = subset_stats(&m, &[0, 1, 2, 3]).unwrap();
        assert_eq!(s.diameter, 1.0);
        assert_eq!(s.weight_sum, 6.0);
        assert_eq!(s.size, 4);
        assert_eq!(s.density, Density::Value(0.375));
    }

    #[test]
    fn cluster_plus_outlier_stats() {
        let m = five_point();
        let s = subset_stats(&m, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(s.diameter, 1.0);
        assert!((s.weight_sum - 4.6).abs() < 1e-12);
        assert!((s.density.value().unwrap() - 0.184).abs() < 1e-12);
    }

    #[test]
    fn singleton_is_dense_by_convention() {
        let m = five_point();
        let s = subset_stats(&m, &[3]).unwrap();
        assert_eq!(s.size, 1);
        assert_eq!(s.weight_sum, 0.0);
        assert_eq!(s.diameter, 0.0);
        assert_eq!(s.density, Density::DenseByConvention);
        assert!(s.density.at_least(f64::INFINITY));
    }

    #[test]
    fn subset_errors() {
        let m = five_point();
        assert_eq!(subset_stats(&m, &[]), Err(MetricError::EmptySubset));
        assert_eq!(subset_stats(&m, &[9]), Err(MetricError::IndexOutOfRange(9)));
        assert_eq!(subset_stats(&m, &[1, 1]), Err(MetricError::DuplicateIndex(1)));
    }

    #[test]
    fn core_of_cluster_plus_outlier() {
        let m = five_point();
        let c = find_core(&m).unwrap();
        assert_eq!(c.center, 0);
        assert_eq!(c.core, vec![0, 1, 2, 3]);
        assert!((c.stats.diameter - 0.1).abs() < 1e-15);
    }

    #[test]
    fn core_of_uniform_and_pair() {
        let u = Metric::from_rows(&[
            vec![0.0, 1.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let c = find_core(&u).unwrap();
        assert_eq!((c.center, c.core), (0, vec![0, 1, 2, 3]));

        let p = Metric::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = find_core(&p).unwrap();
        assert_eq!(c.core, vec![0, 1]);
    }

    #[test]
    fn core_requires_positive_diameter() {
        let z = Metric::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(find_core(&z), Err(MetricError::ZeroDiameter));
        let one = Metric::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(find_core(&one), Err(MetricError::ZeroDiameter));
    }
}
