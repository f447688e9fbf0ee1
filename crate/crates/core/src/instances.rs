//! Seeded instance generators.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{Metric, MetricError};
use crate::seeded_rng;

/// Above this size generators skip the cubic triangle scan; every family is
/// a metric by construction.
pub const FULL_CHECK_MAX_N: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Standard normal points in `dim` dimensions.
    EuclideanGaussian,
    /// Uniform points in the unit cube.
    EuclideanUniformBox,
    /// Balanced random clusters; distance `intra` inside, `inter` across.
    Clustered { clusters: usize, intra: f64, inter: f64 },
    /// Every pair at distance 1.
    UniformMetric,
    /// Points `0..n` on a line with unit spacing.
    PathMetric,
    /// `core_n` points pairwise at `ratio`, `outlier_n` points at distance 1
    /// from everything.
    ClusterPlusOutliers { core_n: usize, outlier_n: usize, ratio: f64 },
    /// Groups `0..levels` of `outliers_per_level` points each, the rest in an
    /// innermost group; two points in groups `g ≤ h` sit at `ratio^g`.
    Nested { levels: usize, outliers_per_level: usize, ratio: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::EuclideanGaussian => "euclidean_gaussian",
            Family::EuclideanUniformBox => "euclidean_uniform_box",
            Family::Clustered { .. } => "clustered",
            Family::UniformMetric => "uniform_metric",
            Family::PathMetric => "path_metric",
            Family::ClusterPlusOutliers { .. } => "cluster_plus_outliers",
            Family::Nested { .. } => "nested",
        }
    }
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        GeneratorSpec { family, n, dim: default_dim(), seed }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let bad = |msg: String| Err(InstanceError::InvalidSpec(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        match self.family {
            Family::EuclideanGaussian | Family::EuclideanUniformBox if self.dim == 0 => {
                bad("dim must be at least 1".into())
            }
            Family::Clustered { clusters, intra, inter } => {
                if clusters == 0 || clusters > self.n {
                    return bad(format!("{clusters} clusters for n = {}", self.n));
                }
                if !(intra.is_finite() && inter.is_finite() && intra >= 0.0 && inter > 0.0) {
                    return bad(format!("scales must be finite with inter > 0, got {intra}, {inter}"));
                }
                if intra > 2.0 * inter {
                    return bad(format!("intra {intra} exceeds twice inter {inter}"));
                }
                Ok(())
            }
            Family::ClusterPlusOutliers { core_n, outlier_n, ratio } => {
                if core_n + outlier_n != self.n {
                    return bad(format!("core_n + outlier_n = {} but n = {}", core_n + outlier_n, self.n));
                }
                if !(ratio.is_finite() && (0.0..=2.0).contains(&ratio)) {
                    return bad(format!("ratio must lie in [0, 2], got {ratio}"));
                }
                Ok(())
            }
            Family::Nested { levels, outliers_per_level, ratio } => {
                if levels * outliers_per_level > self.n {
                    return bad(format!("{levels} levels of {outliers_per_level} exceed n = {}", self.n));
                }
                if !(ratio.is_finite() && ratio > 0.0 && ratio <= 1.0) {
                    return bad(format!("ratio must lie in (0, 1], got {ratio}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Euclidean distance matrix of a point cloud.
pub fn euclidean_metric(points: &[Vec<f64>]) -> Result<Metric, MetricError> {
    let n = points.len();
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            flat[i * n + j] = d;
            flat[j * n + i] = d;
        }
    }
    validated(n, &flat)
}

fn validated(n: usize, flat: &[f64]) -> Result<Metric, MetricError> {
    if n <= FULL_CHECK_MAX_N {
        Metric::from_flat(n, flat)
    } else {
        Metric::from_flat_unchecked_triangle(n, flat)
    }
}

/// Point clouds for the Euclidean families; `None` for the others.
pub fn generate_points(spec: &GeneratorSpec) -> Result<Option<Vec<Vec<f64>>>, InstanceError> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed, 0);
    let mut cloud = |sample: &mut dyn FnMut(&mut rand_chacha::ChaCha8Rng) -> f64| {
        (0..spec.n).map(|_| (0..spec.dim).map(|_| sample(&mut rng)).collect()).collect()
    };
    Ok(match spec.family {
        Family::EuclideanGaussian => Some(cloud(&mut |r| StandardNormal.sample(r))),
        Family::EuclideanUniformBox => Some(cloud(&mut |r| r.random::<f64>())),
        _ => None,
    })
}

type GroupDistance = Box<dyn Fn(usize, usize) -> f64>;

pub fn generate(spec: &GeneratorSpec) -> Result<Metric, InstanceError> {
    if let Some(points) = generate_points(spec)? {
        return Ok(euclidean_metric(&points)?);
    }
    let n = spec.n;
    let mut rng = seeded_rng(spec.seed, 0);
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(&mut rng);
    // `group[p]` for the labeled families; distance is a function of groups.
    let (group, dist): (Vec<usize>, GroupDistance) = match spec.family {
        Family::UniformMetric => ((0..n).collect(), Box::new(|_, _| 1.0)),
        Family::PathMetric => ((0..n).collect(), Box::new(|a: usize, b: usize| a.abs_diff(b) as f64)),
        Family::Clustered { clusters, intra, inter } => {
            let mut group = vec![0; n];
            for (slot, &p) in labels.iter().enumerate() {
                group[p] = slot % clusters;
            }
            (group, Box::new(move |a, b| if a == b { intra } else { inter }))
        }
        Family::ClusterPlusOutliers { core_n, ratio, .. } => {
            // Group 0 is the core; each outlier is its own group.
            let mut group = vec![0; n];
            for (slot, &p) in labels.iter().enumerate() {
                group[p] = if slot < core_n { 0 } else { slot - core_n + 1 };
            }
            (group, Box::new(move |a, b| if a == 0 && b == 0 { ratio } else { 1.0 }))
        }
        Family::Nested { levels, outliers_per_level, ratio } => {
            let mut group = vec![0; n];
            for (slot, &p) in labels.iter().enumerate() {
                group[p] = slot.checked_div(outliers_per_level).map_or(levels, |g| g.min(levels));
            }
            (group, Box::new(move |a: usize, b: usize| ratio.powi(a.min(b) as i32)))
        }
        Family::EuclideanGaussian | Family::EuclideanUniformBox => unreachable!("handled above"),
    };
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(group[i], group[j]);
            flat[i * n + j] = d;
            flat[j * n + i] = d;
        }
    }
    Ok(validated(n, &flat)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::full_stats;

    #[test]
    fn uniform_and_path() {
        let u = generate(&GeneratorSpec::new(Family::UniformMetric, 4, 0)).unwrap();
        assert_eq!(
            u.to_rows(),
            vec![
                vec![0.0, 1.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 1.0],
                vec![1.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 0.0],
            ]
        );
        let p = generate(&GeneratorSpec::new(Family::PathMetric, 3, 0)).unwrap();
        assert_eq!(p.to_rows(), vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]);
    }

    #[test]
    fn cluster_plus_outliers_density() {
        let fam = Family::ClusterPlusOutliers { core_n: 50, outlier_n: 1, ratio: 1e-4 };
        for seed in [0, 7] {
            let m = generate(&GeneratorSpec::new(fam.clone(), 51, seed)).unwrap();
            let rho = full_stats(&m).density.value().unwrap();
            // (C(50,2)·1e-4 + 50) / 51²
            assert!((rho - 50.1225 / 2601.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nested_is_an_ultrametric_with_expected_distances() {
        let fam = Family::Nested { levels: 2, outliers_per_level: 1, ratio: 0.1 };
        let m = generate(&GeneratorSpec::new(fam, 5, 0)).unwrap();
        let mut values: Vec<f64> =
            (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j))).map(|(i, j)| m.get(i, j)).collect();
        values.sort_by(f64::total_cmp);
        // Innermost trio: 3 pairs at 0.01; level-1 point: 3 pairs at 0.1; top: 4 at 1.
        let expected = [0.01, 0.01, 0.01, 0.1, 0.1, 0.1, 1.0, 1.0, 1.0, 1.0];
        for (v, e) in values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        for fam in [
            Family::EuclideanGaussian,
            Family::EuclideanUniformBox,
            Family::Clustered { clusters: 3, intra: 0.1, inter: 1.0 },
        ] {
            let a = generate(&GeneratorSpec::new(fam.clone(), 12, 3)).unwrap();
            let b = generate(&GeneratorSpec::new(fam.clone(), 12, 3)).unwrap();
            let c = generate(&GeneratorSpec::new(fam.clone(), 12, 4)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c, "{fam:?}");
        }
    }

    #[test]
    fn clustered_balances_clusters() {
        let fam = Family::Clustered { clusters: 2, intra: 0.1, inter: 1.0 };
        let m = generate(&GeneratorSpec::new(fam, 6, 11)).unwrap();
        let close = (0..6).filter(|&j| j != 0 && m.get(0, j) == 0.1).count();
        assert_eq!(close, 2);
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = [
            GeneratorSpec::new(Family::UniformMetric, 0, 0),
            GeneratorSpec::new(Family::Clustered { clusters: 2, intra: 3.0, inter: 1.0 }, 4, 0),
            GeneratorSpec::new(Family::ClusterPlusOutliers { core_n: 3, outlier_n: 1, ratio: 0.1 }, 5, 0),
            GeneratorSpec::new(Family::Nested { levels: 3, outliers_per_level: 2, ratio: 0.5 }, 5, 0),
            GeneratorSpec { dim: 0, ..GeneratorSpec::new(Family::EuclideanGaussian, 3, 0) },
        ];
        for spec in bad {
            assert!(matches!(generate(&spec), Err(InstanceError::InvalidSpec(_))), "{spec:?}");
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = GeneratorSpec::new(Family::Clustered { clusters: 2, intra: 0.1, inter: 1.0 }, 6, 9);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"family\":\"clustered\""));
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&text).unwrap(), spec);
        let minimal: GeneratorSpec = serde_json::from_str(r#"{"family":"path_metric","n":3}"#).unwrap();
        assert_eq!(minimal.dim, 2);
    }
}
