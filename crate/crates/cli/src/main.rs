//! `myosched`: generate workloads, build offline schedules, simulate online
//! execution, run experiment grids and validate traces.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infeasible
//! schedule or invalid trace.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use myosched::experiments::{emit_figure_data, run_grid, ExperimentGrid};
use myosched::sim::SimConfig;
use myosched::{
    build, generate, load_workload, replay_validate, save_workload, simulate, BuildConfig, HeuristicSpec,
    OverheadModel, SimOutcome, TimeRange, WindowSize, WorkloadParams,
};

#[derive(Debug, Parser)]
#[command(name = "myosched", version, about = "Original and Myopic heuristic real-time scheduling")]
struct Cli {
    /// Seed for workload generation (`gen`) or override of the grid's base_seed (`grid`).
    /// Other subcommands are deterministic and ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random workload file.
    Gen(GenArgs),
    /// Build an offline schedule. Exit 2 when no feasible schedule is found.
    Build(BuildArgs),
    /// Simulate online execution and print a key=value summary.
    Sim(SimArgs),
    /// Run an experiment grid and write figure CSVs.
    Grid(GridArgs),
    /// Check a simulation trace against its workload. Exit 2 when invalid.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of tasks.
    #[arg(short = 'n', long, default_value_t = 200)]
    n: usize,
    /// Inclusive processing-time range.
    #[arg(long = "proc", default_value = "10..11")]
    proc_range: TimeRange,
    /// Deadline slack beyond t_gen + t_proc.
    #[arg(long, default_value_t = 100)]
    laxity: u64,
    /// Inclusive range of inter-arrival gaps.
    #[arg(long, default_value = "0..3")]
    arrival: TimeRange,
    /// Number of distinct resources.
    #[arg(long, default_value_t = 0)]
    resources: usize,
    /// Probability that a task requests each resource.
    #[arg(long, default_value_t = 0.2)]
    request_prob: f64,
    /// Probability that a request is shared rather than exclusive.
    #[arg(long, default_value_t = 0.5)]
    share_prob: f64,
    /// Output file; stdout when omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HeuristicArgs {
    /// min_d | min_p | min_est | min_laxity | d+w*p:<w> | d+w*est:<w>
    #[arg(long, default_value = "d+w*est:0.5")]
    heuristic: HeuristicSpec,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Workload file.
    workload: PathBuf,
    /// Window size, or `unbounded` for the Original algorithm.
    #[arg(long, default_value = "unbounded")]
    k: WindowSize,
    #[command(flatten)]
    heuristic: HeuristicArgs,
    /// Backtracking budget; defaults to 10 * n.
    #[arg(long)]
    max_backtracks: Option<usize>,
    /// Give up at the first infeasible step instead of backtracking.
    #[arg(long, conflicts_with = "max_backtracks")]
    abort: bool,
    /// Schedule CSV output; stdout when omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Workload file.
    workload: PathBuf,
    /// Window size (at least 1).
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[command(flatten)]
    heuristic: HeuristicArgs,
    /// Fixed scheduling cost per decision.
    #[arg(long, default_value_t = 1)]
    c0: u64,
    /// Scheduling cost per window task.
    #[arg(long, default_value_t = 1)]
    c1: u64,
    /// Stop making decisions at this time.
    #[arg(long)]
    horizon: Option<u64>,
    /// Write the JSON-lines trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Grid configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for figure CSVs.
    #[arg(long)]
    out: PathBuf,
    /// Draw a fresh workload for every (k, w) cell instead of pairing them.
    #[arg(long)]
    independent_seeds: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    trace: PathBuf,
}

enum Status {
    Ok,
    Rejected,
}

fn write_output(path: Option<&PathBuf>, contents: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(contents.as_bytes()).context("writing stdout"),
    }
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Gen(a) => {
            let params = WorkloadParams {
                n: a.n,
                proc_range: a.proc_range,
                laxity: a.laxity,
                arrival_span: a.arrival,
                n_resources: a.resources,
                request_prob: a.request_prob,
                share_prob: a.share_prob,
            };
            let ts = generate(&params, cli.seed.unwrap_or(0))?;
            match &a.output {
                Some(p) => save_workload(&ts, p)?,
                None => write_output(None, &ts.to_file_string())?,
            }
            Ok(Status::Ok)
        }
        Command::Build(a) => {
            let ts = load_workload(&a.workload).with_context(|| format!("loading {}", a.workload.display()))?;
            let spec = a.heuristic.heuristic;
            let cfg = if a.abort {
                BuildConfig::abort(spec, a.k)
            } else {
                BuildConfig::backtracking(spec, a.k, a.max_backtracks.unwrap_or(10 * ts.len()))
            };
            let result = build(&ts, &cfg)?;
            write_output(a.output.as_ref(), &result.to_csv(&ts))?;
            Ok(if result.is_feasible() { Status::Ok } else { Status::Rejected })
        }
        Command::Sim(a) => {
            let ts = load_workload(&a.workload).with_context(|| format!("loading {}", a.workload.display()))?;
            let mut cfg = SimConfig::new(a.heuristic.heuristic, a.k, OverheadModel::new(a.c0, a.c1));
            cfg.horizon = a.horizon;
            let out = simulate(&ts, &cfg)?;
            if let Some(p) = &a.trace {
                write_output(Some(p), &out.to_jsonl())?;
            }
            println!("{}", out.summary_line());
            Ok(Status::Ok)
        }
        Command::Grid(a) => {
            let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
            let mut grid = ExperimentGrid::from_json(&text)?;
            if let Some(seed) = cli.seed {
                grid.base_seed = seed;
            }
            grid.independent_seeds |= a.independent_seeds;
            let results = run_grid(&grid)?;
            for r in &results {
                let c = &r.condition;
                match &r.error {
                    None => println!(
                        "n={} proc={} k={} w={} mean_completed={} min_completed={} max_completed={}",
                        c.n, c.proc_range, c.k, c.w, r.mean_completed, r.min_completed, r.max_completed
                    ),
                    Some(e) => eprintln!("n={} proc={} k={} w={} failed: {e}", c.n, c.proc_range, c.k, c.w),
                }
            }
            emit_figure_data(&results, &a.out)?;
            Ok(Status::Ok)
        }
        Command::Validate(a) => {
            let ts = load_workload(&a.workload).with_context(|| format!("loading {}", a.workload.display()))?;
            let text = fs::read_to_string(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
            let outcome = match SimOutcome::from_jsonl(&text) {
                Ok(o) => o,
                Err(e) => {
                    println!("valid=false");
                    eprintln!("{e}");
                    return Ok(Status::Rejected);
                }
            };
            match replay_validate(&ts, &outcome) {
                Ok(()) => {
                    println!("valid=true");
                    Ok(Status::Ok)
                }
                Err(v) => {
                    println!("valid=false");
                    eprintln!("{v}");
                    Ok(Status::Rejected)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Rejected) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
