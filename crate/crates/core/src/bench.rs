//! Benchmark sweeps: generate instances, run algorithms, compare against the
//! exhaustive optimum where it is affordable, and emit CSV plus traces.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hc_dense::{solve_hc_dense, DenseHcConfig};
use crate::hc_peeling::{solve_hc, HcPeelConfig};
use crate::instances::{generate, GeneratorSpec};
use crate::la_dense::{solve_la_dense, DenseLaConfig};
use crate::la_peeling::{solve_la, LaPeelConfig};
use crate::metric::Metric;
use crate::objectives::{evaluate_hc, evaluate_la};
use crate::oracles::{average_linkage_hc, brute_force_hc, brute_force_la, random_bisection_la};
use crate::partition::SearchBudget;
use crate::search::GridMode;
use crate::trace::{LevelRecord, RecursionTrace};

/// Largest instance compared against an exhaustive optimum.
pub const BENCH_ORACLE_MAX_N: usize = 8;
/// Allowed excess of a solver value over the optimum.
pub const RATIO_TOLERANCE: f64 = 1e-9;

pub const CSV_HEADER: [&str; 10] =
    ["instance_id", "family", "n", "eps", "algorithm", "value", "oracle_value", "ratio", "depth", "cases"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("instance {id}: {message}")]
    InstanceInvalid { id: String, message: String },
    #[error("{algorithm} on {id}: {message}")]
    Solver { id: String, algorithm: Algorithm, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "peel-la")]
    PeelLa,
    #[serde(rename = "peel-hc")]
    PeelHc,
    #[serde(rename = "oracle-la")]
    OracleLa,
    #[serde(rename = "oracle-hc")]
    OracleHc,
    #[serde(rename = "avg-link")]
    AvgLink,
    #[serde(rename = "bisect-la")]
    BisectLa,
    #[serde(rename = "dense-la")]
    DenseLa,
    #[serde(rename = "dense-hc")]
    DenseHc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    La,
    Hc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::PeelLa,
        Algorithm::PeelHc,
        Algorithm::OracleLa,
        Algorithm::OracleHc,
        Algorithm::AvgLink,
        Algorithm::BisectLa,
        Algorithm::DenseLa,
        Algorithm::DenseHc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PeelLa => "peel-la",
            Algorithm::PeelHc => "peel-hc",
            Algorithm::OracleLa => "oracle-la",
            Algorithm::OracleHc => "oracle-hc",
            Algorithm::AvgLink => "avg-link",
            Algorithm::BisectLa => "bisect-la",
            Algorithm::DenseLa => "dense-la",
            Algorithm::DenseHc => "dense-hc",
        }
    }

    pub fn objective(self) -> Objective {
        match self {
            Algorithm::PeelLa | Algorithm::OracleLa | Algorithm::BisectLa | Algorithm::DenseLa => Objective::La,
            _ => Objective::Hc,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

fn one() -> usize {
    1
}

/// A generator spec, optionally expanded over `count` consecutive seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    #[serde(default = "one")]
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub instances: Vec<InstanceEntry>,
    pub eps: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    /// Seed for randomized algorithms; instance seeds live in the specs.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid_mode: GridMode,
    #[serde(default)]
    pub budget: SearchBudget,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: BenchConfig = serde_json::from_str(text).map_err(|e| BenchError::ConfigParse(e.to_string()))?;
        if cfg.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(BenchError::ConfigParse(format!("eps values must lie in (0, 1): {:?}", cfg.eps)));
        }
        Ok(cfg)
    }

    /// `(instance id, spec)` in config order.
    pub fn expand(&self) -> Vec<(String, GeneratorSpec)> {
        let mut out = Vec::new();
        for entry in &self.instances {
            for i in 0..entry.count {
                let mut spec = entry.spec.clone();
                spec.seed = entry.spec.seed + i as u64;
                let id = format!("{:03}-{}-n{}-s{}", out.len(), spec.family.name(), spec.n, spec.seed);
                out.push((id, spec));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance_id: String,
    pub family: String,
    pub n: usize,
    pub eps: f64,
    pub algorithm: Algorithm,
    pub value: f64,
    pub oracle_value: Option<f64>,
    pub ratio: Option<f64>,
    pub depth: Option<usize>,
    pub cases: Option<String>,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLine {
    pub instance_id: String,
    pub algorithm: Algorithm,
    pub eps: f64,
    #[serde(flatten)]
    pub record: LevelRecord,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BenchOptions {
    /// Adds a `wall_time_ms` column, which makes output run-dependent.
    pub timing: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub traces: Vec<TraceLine>,
    /// Invariant failures observed during the sweep.
    pub violations: Vec<String>,
    pub timing: bool,
}

fn opt(v: Option<impl ToString>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = CSV_HEADER.to_vec();
        if self.timing {
            header.push("wall_time_ms");
        }
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.instance_id.clone(),
                r.family.clone(),
                r.n.to_string(),
                r.eps.to_string(),
                r.algorithm.to_string(),
                r.value.to_string(),
                opt(r.oracle_value),
                opt(r.ratio),
                opt(r.depth),
                opt(r.cases.clone()),
            ];
            if self.timing {
                rec.push(opt(r.wall_time_ms));
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn traces_json_lines(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            out.push_str(&serde_json::to_string(t).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    /// Mean ratio of `algorithm` over rows that have one.
    pub fn mean_ratio(&self, algorithm: Algorithm) -> Option<f64> {
        let ratios: Vec<f64> = self.rows.iter().filter(|r| r.algorithm == algorithm).filter_map(|r| r.ratio).collect();
        (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
    }
}

struct Outcome {
    value: f64,
    trace: Option<RecursionTrace>,
}

fn run_algorithm(m: &Metric, algorithm: Algorithm, eps: f64, cfg: &BenchConfig) -> Result<Outcome, String> {
    let la_dense = DenseLaConfig { eps, grid_mode: cfg.grid_mode, budget: cfg.budget, seed: cfg.seed };
    let hc_dense = DenseHcConfig { eps, grid_mode: cfg.grid_mode, budget: cfg.budget, seed: cfg.seed };
    let plain = |value: f64| Outcome { value, trace: None };
    let e = |err: &dyn fmt::Display| err.to_string();
    Ok(match algorithm {
        Algorithm::PeelLa => {
            let (y, trace) = solve_la(m, &LaPeelConfig { eps, dense: la_dense, max_depth: None }).map_err(|x| e(&x))?;
            Outcome { value: evaluate_la(m, &y).map_err(|x| e(&x))?, trace: Some(trace) }
        }
        Algorithm::PeelHc => {
            let (t, trace) = solve_hc(m, &HcPeelConfig { eps, dense: hc_dense, max_depth: None }).map_err(|x| e(&x))?;
            Outcome { value: evaluate_hc(m, &t).map_err(|x| e(&x))?, trace: Some(trace) }
        }
        Algorithm::OracleLa => plain(brute_force_la(m).map_err(|x| e(&x))?.value),
        Algorithm::OracleHc => plain(brute_force_hc(m).map_err(|x| e(&x))?.value),
        Algorithm::AvgLink => plain(evaluate_hc(m, &average_linkage_hc(m)).map_err(|x| e(&x))?),
        Algorithm::BisectLa => plain(evaluate_la(m, &random_bisection_la(m, cfg.seed)).map_err(|x| e(&x))?),
        Algorithm::DenseLa => {
            plain(evaluate_la(m, &solve_la_dense(m, &la_dense).map_err(|x| e(&x))?).map_err(|x| e(&x))?)
        }
        Algorithm::DenseHc => {
            plain(evaluate_hc(m, &solve_hc_dense(m, &hc_dense).map_err(|x| e(&x))?).map_err(|x| e(&x))?)
        }
    })
}

type InstanceResult = (Vec<BenchRow>, Vec<TraceLine>, Vec<String>);

fn run_instance(
    id: &str,
    spec: &GeneratorSpec,
    cfg: &BenchConfig,
    opts: BenchOptions,
) -> Result<InstanceResult, BenchError> {
    let m = generate(spec).map_err(|e| BenchError::InstanceInvalid { id: id.to_string(), message: e.to_string() })?;
    let n = m.n();
    let mut oracle: HashMap<Objective, Option<f64>> = HashMap::new();
    let mut oracle_value = |obj: Objective| {
        *oracle.entry(obj).or_insert_with(|| {
            (n <= BENCH_ORACLE_MAX_N).then(|| match obj {
                Objective::La => brute_force_la(&m).expect("within guard").value,
                Objective::Hc => brute_force_hc(&m).expect("within guard").value,
            })
        })
    };
    let (mut rows, mut traces, mut violations) = (Vec::new(), Vec::new(), Vec::new());
    for &eps in &cfg.eps {
        for &algorithm in &cfg.algorithms {
            let start = Instant::now();
            let out = run_algorithm(&m, algorithm, eps, cfg).map_err(|message| BenchError::Solver {
                id: id.to_string(),
                algorithm,
                message,
            })?;
            let wall = start.elapsed().as_secs_f64() * 1e3;
            let best = oracle_value(algorithm.objective());
            let ratio = best.map(|b| if b > 0.0 { out.value / b } else { 1.0 });
            if let Some(r) = ratio {
                if r > 1.0 + RATIO_TOLERANCE {
                    violations.push(format!("{id} {algorithm} eps={eps}: ratio {r} exceeds 1"));
                }
            }
            if let Some(t) = &out.trace {
                if !t.well_formed() {
                    violations.push(format!("{id} {algorithm} eps={eps}: malformed trace {}", t.cases()));
                }
                for (a, b) in t.density_steps() {
                    if b.is_some_and(|b| b < 4.0 * a) {
                        violations.push(format!("{id} {algorithm} eps={eps}: density {a} -> {b:?} grew less than 4x"));
                    }
                }
                traces.extend(t.levels.iter().map(|record| TraceLine {
                    instance_id: id.to_string(),
                    algorithm,
                    eps,
                    record: record.clone(),
                }));
            }
            rows.push(BenchRow {
                instance_id: id.to_string(),
                family: spec.family.name().to_string(),
                n,
                eps,
                algorithm,
                value: out.value,
                oracle_value: best,
                ratio,
                depth: out.trace.as_ref().map(|t| t.depth()),
                cases: out.trace.as_ref().map(|t| t.cases()),
                wall_time_ms: opts.timing.then_some(wall),
            });
        }
    }
    Ok((rows, traces, violations))
}

/// Runs the sweep; instances in parallel, output in config order.
pub fn run_bench(cfg: &BenchConfig, opts: BenchOptions) -> Result<BenchReport, BenchError> {
    let per_instance: Vec<InstanceResult> =
        cfg.expand().par_iter().map(|(id, spec)| run_instance(id, spec, cfg, opts)).collect::<Result<_, _>>()?;
    let mut report = BenchReport { timing: opts.timing, ..BenchReport::default() };
    for (rows, traces, violations) in per_instance {
        report.rows.extend(rows);
        report.traces.extend(traces);
        report.violations.extend(violations);
    }
    Ok(report)
}
