use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use multipeel::bench::{run_bench, BenchConfig, BenchError, BenchOptions};
use multipeel::format::{parse_any, write_metric, write_points, FormatError};
use multipeel::hc_dense::{solve_hc_dense, DenseHcConfig};
use multipeel::hc_peeling::{solve_hc, HcPeelConfig};
use multipeel::instances::{generate, generate_points, Family, GeneratorSpec};
use multipeel::la_dense::{solve_la_dense, DenseLaConfig};
use multipeel::la_peeling::{solve_la, LaPeelConfig, PeelError};
use multipeel::metric::{find_core, full_stats, Metric};
use multipeel::objectives::{evaluate_hc, evaluate_la};
use multipeel::oracles::{brute_force_hc, brute_force_la};
use multipeel::partition::SearchBudget;
use multipeel::search::GridMode;
use multipeel::trace::RecursionTrace;

/// Max linear arrangement and max hierarchical clustering on finite metrics.
///
/// Objective values sum over unordered point pairs, each pair counted once.
#[derive(Parser)]
#[command(name = "multipeel", version)]
struct Cli {
    /// Seed for randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a metric file and print its statistics.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate an instance.
    Gen(GenArgs),
    /// Max linear arrangement by recursive peeling.
    SolveLa(SolveArgs),
    /// Max hierarchical clustering by recursive peeling.
    SolveHc(SolveArgs),
    /// Exact optimum by exhaustive search (small inputs only).
    Oracle {
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a benchmark sweep described by a JSON config; writes CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// JSON-lines file for per-level recursion traces.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Add a wall-time column (output is then no longer reproducible).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    La,
    Hc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    EuclideanGaussian,
    EuclideanUniformBox,
    Clustered,
    UniformMetric,
    PathMetric,
    ClusterPlusOutliers,
    Nested,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 0.1)]
    intra: f64,
    #[arg(long, default_value_t = 1.0)]
    inter: f64,
    #[arg(long)]
    core_n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    outlier_n: usize,
    #[arg(long, default_value_t = 1e-4)]
    ratio: f64,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = 1)]
    outliers_per_level: usize,
    /// Write Euclidean families as a point cloud instead of a matrix.
    #[arg(long)]
    points: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value = "reduced")]
    grid_mode: GridMode,
    #[arg(long)]
    budget_restarts: Option<usize>,
    /// Skip peeling and call the dense solver directly.
    #[arg(long)]
    dense_only: bool,
    /// JSON-lines file for the per-level recursion trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

/// Failure classes, mapped to exit codes 1 and 2.
enum Failure {
    Invariant(anyhow::Error),
    Usage(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path) -> Result<Metric> {
    parse_any(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn budget(args: &SolveArgs) -> SearchBudget {
    let mut b = SearchBudget::default();
    if let Some(r) = args.budget_restarts {
        b.restarts = r;
    }
    b
}

fn write_trace(path: &Option<PathBuf>, trace: &RecursionTrace) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, trace.to_json_lines()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// A recursion that outruns its depth cap means density stopped growing.
fn peel_failure(e: PeelError) -> Failure {
    match e {
        PeelError::DepthExceeded { .. } => Failure::Invariant(e.into()),
        _ => Failure::Usage(e.into()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring threads")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Validate { input } => {
            let text = read(&input)?;
            let m = match parse_any(&text) {
                Ok(m) => m,
                Err(FormatError::Metric(e)) => return Err(Failure::Invariant(anyhow!("{}: {e}", input.display()))),
                Err(e) => return Err(Failure::Usage(anyhow!("{}: {e}", input.display()))),
            };
            let s = full_stats(&m);
            let mut report = format!(
                "valid metric\nn {}\ndiameter {}\nweight {}\ndensity {}\n",
                m.n(),
                s.diameter,
                s.weight_sum,
                s.density.value().map_or("dense-by-convention".to_string(), |d| d.to_string())
            );
            if let Ok(core) = find_core(&m) {
                report.push_str(&format!("core_size {}\ncore_center {}\n", core.core.len(), core.center));
            }
            emit(&cli.out, &report)?;
        }
        Command::Gen(g) => {
            let family = match g.family {
                FamilyArg::EuclideanGaussian => Family::EuclideanGaussian,
                FamilyArg::EuclideanUniformBox => Family::EuclideanUniformBox,
                FamilyArg::Clustered => Family::Clustered { clusters: g.clusters, intra: g.intra, inter: g.inter },
                FamilyArg::UniformMetric => Family::UniformMetric,
                FamilyArg::PathMetric => Family::PathMetric,
                FamilyArg::ClusterPlusOutliers => Family::ClusterPlusOutliers {
                    core_n: g.core_n.unwrap_or(g.n.saturating_sub(g.outlier_n)),
                    outlier_n: g.outlier_n,
                    ratio: g.ratio,
                },
                FamilyArg::Nested => {
                    Family::Nested { levels: g.levels, outliers_per_level: g.outliers_per_level, ratio: g.ratio }
                }
            };
            let spec = GeneratorSpec { family, n: g.n, dim: g.dim, seed };
            let text = match (g.points, generate_points(&spec)?) {
                (true, Some(points)) => write_points(&points),
                (true, None) => return Err(Failure::Usage(anyhow!("--points needs a Euclidean family"))),
                (false, _) => write_metric(&generate(&spec)?),
            };
            emit(&cli.out, &text)?;
        }
        Command::SolveLa(args) => {
            let m = load(&args.input)?;
            let dense = DenseLaConfig { eps: args.eps, grid_mode: args.grid_mode, budget: budget(&args), seed };
            let y = if args.dense_only {
                solve_la_dense(&m, &dense)?
            } else {
                let (y, trace) =
                    solve_la(&m, &LaPeelConfig { eps: args.eps, dense, max_depth: None }).map_err(peel_failure)?;
                write_trace(&args.trace, &trace)?;
                y
            };
            emit(&cli.out, &format!("value {}\narrangement {y}\n", evaluate_la(&m, &y)?))?;
        }
        Command::SolveHc(args) => {
            let m = load(&args.input)?;
            let dense = DenseHcConfig { eps: args.eps, grid_mode: args.grid_mode, budget: budget(&args), seed };
            let t = if args.dense_only {
                solve_hc_dense(&m, &dense)?
            } else {
                let (t, trace) =
                    solve_hc(&m, &HcPeelConfig { eps: args.eps, dense, max_depth: None }).map_err(peel_failure)?;
                write_trace(&args.trace, &trace)?;
                t
            };
            emit(&cli.out, &format!("value {}\ntree {}\n", evaluate_hc(&m, &t)?, t.to_newick()))?;
        }
        Command::Oracle { objective, input } => {
            let m = load(&input)?;
            let text = match objective {
                ObjectiveArg::La => {
                    let r = brute_force_la(&m)?;
                    format!("value {}\narrangement {}\nexplored {}\n", r.value, r.witness, r.explored)
                }
                ObjectiveArg::Hc => {
                    let r = brute_force_hc(&m)?;
                    format!("value {}\ntree {}\nexplored {}\n", r.value, r.witness.to_newick(), r.explored)
                }
            };
            emit(&cli.out, &text)?;
        }
        Command::Bench { config, traces, timing } => {
            let cfg = BenchConfig::from_json(&read(&config)?)?;
            let report = run_bench(&cfg, BenchOptions { timing }).map_err(|e| match e {
                BenchError::Solver { .. } => Failure::Invariant(e.into()),
                _ => Failure::Usage(e.into()),
            })?;
            emit(&cli.out, &report.to_csv())?;
            if let Some(p) = traces {
                fs::write(&p, report.traces_json_lines()).with_context(|| format!("writing {}", p.display()))?;
            }
            if !report.violations.is_empty() {
                return Err(Failure::Invariant(anyhow!(
                    "{} invariant violations:\n{}",
                    report.violations.len(),
                    report.violations.join("\n")
                )));
            }
        }
    }
    Ok(())
}
