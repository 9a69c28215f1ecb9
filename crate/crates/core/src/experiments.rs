//! Replicated experiment grids over load, processing time, window size and weight.
//!
//! Each cell `(n, proc_range, k, w)` is simulated once per replication. By
//! default the workload seed depends only on `(base_seed, n, proc_range,
//! replication)`, so every `(k, w)` cell in a row sees the same task sets and
//! window/weight comparisons are paired. `independent_seeds` mixes `k` and `w`
//! into the seed as well.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::{HeuristicKind, HeuristicSpec, Weight};
use crate::sim::{simulate, OverheadModel, SimConfig};
use crate::workload::{generate, TaskSet, TimeRange, WorkloadParams, PRNG_NAME};
use crate::Time;

pub const FIGURE_HEADER: &str = "# myosched-figure v1";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no results to emit")]
    NoResults,
    #[error("grid config: {0}")]
    Config(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn default_spec_kind() -> HeuristicKind {
    HeuristicKind::DeadlinePlusWeightedEst
}
fn default_replications() -> usize {
    5
}
fn default_arrival_span() -> TimeRange {
    TimeRange::new(0, 3)
}
fn default_share_prob() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub loads: Vec<usize>,
    pub proc_ranges: Vec<TimeRange>,
    pub laxity: Time,
    pub ks: Vec<usize>,
    pub ws: Vec<Weight>,
    #[serde(default = "default_spec_kind")]
    pub spec_kind: HeuristicKind,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub overhead: OverheadModel,
    #[serde(default = "default_arrival_span")]
    pub arrival_span: TimeRange,
    #[serde(default)]
    pub n_resources: usize,
    #[serde(default)]
    pub request_prob: f64,
    #[serde(default = "default_share_prob")]
    pub share_prob: f64,
    #[serde(default)]
    pub independent_seeds: bool,
    /// Permit window size 1, which is excluded by default.
    #[serde(default)]
    pub allow_window_one: bool,
}

impl ExperimentGrid {
    /// Loads 200/500/1000, processing time 10..11, laxity 100, windows
    /// 2..=10 step 2, W in {0.5, 1.0}, five replications.
    pub fn load_study(base_seed: u64) -> Self {
        Self {
            loads: vec![200, 500, 1000],
            proc_ranges: vec![TimeRange::new(10, 11)],
            laxity: 100,
            ks: vec![2, 4, 6, 8, 10],
            ws: vec![Weight::HALF, Weight::ONE],
            spec_kind: default_spec_kind(),
            replications: default_replications(),
            base_seed,
            overhead: OverheadModel::default(),
            arrival_span: default_arrival_span(),
            n_resources: 0,
            request_prob: 0.0,
            share_prob: default_share_prob(),
            independent_seeds: false,
            allow_window_one: false,
        }
    }

    /// 500 tasks with processing time 5..6 and 20..21, otherwise as
    /// [`ExperimentGrid::load_study`].
    pub fn processing_time_study(base_seed: u64) -> Self {
        Self {
            loads: vec![500],
            proc_ranges: vec![TimeRange::new(5, 6), TimeRange::new(20, 21)],
            ..Self::load_study(base_seed)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let grid: Self = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidGrid(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.loads.is_empty() || self.proc_ranges.is_empty() || self.ks.is_empty() || self.ws.is_empty() {
            return bad("loads, proc_ranges, ks and ws must all be non-empty");
        }
        if self.ks.contains(&0) {
            return bad("window sizes must be at least 1");
        }
        if !self.allow_window_one && self.ks.contains(&1) {
            return bad("window size 1 is excluded unless allow_window_one is set");
        }
        Ok(())
    }

    fn workload_params(&self, n: usize, proc_range: TimeRange) -> WorkloadParams {
        WorkloadParams {
            n,
            proc_range,
            laxity: self.laxity,
            arrival_span: self.arrival_span,
            n_resources: self.n_resources,
            request_prob: self.request_prob,
            share_prob: self.share_prob,
        }
    }

    /// Workload seed for one replication of one cell.
    pub fn seed_for(&self, n: usize, proc_range: TimeRange, k: usize, w: Weight, rep: usize) -> u64 {
        let mut parts = vec![self.base_seed, n as u64, proc_range.lo, proc_range.hi, rep as u64];
        if self.independent_seeds {
            let r = w.ratio();
            parts.extend([k as u64, *r.numer() as u64, *r.denom() as u64]);
        }
        mix_seed(&parts)
    }

    /// The TaskSet a given cell sees in replication `rep`.
    pub fn task_set(&self, n: usize, proc_range: TimeRange, k: usize, w: Weight, rep: usize) -> Result<TaskSet, String> {
        let params = self.workload_params(n, proc_range);
        generate(&params, self.seed_for(n, proc_range, k, w, rep)).map_err(|e| e.to_string())
    }

    fn cells(&self) -> Vec<Condition> {
        let mut cells = Vec::new();
        for &n in &self.loads {
            for &proc_range in &self.proc_ranges {
                for &k in &self.ks {
                    for &w in &self.ws {
                        cells.push(Condition {
                            n,
                            proc_range,
                            k,
                            w,
                            laxity: self.laxity,
                            heuristic: HeuristicSpec::new(self.spec_kind, w).to_string(),
                        });
                    }
                }
            }
        }
        cells
    }
}

/// SplitMix64 folded over the parts.
fn mix_seed(parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(0x6D79_6F73_6368_6564, |acc, &p| splitmix(acc ^ splitmix(p)))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub n: usize,
    pub proc_range: TimeRange,
    pub k: usize,
    pub w: Weight,
    pub laxity: Time,
    pub heuristic: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepSummary {
    pub seed: u64,
    pub completed: usize,
    pub discarded: usize,
    pub makespan: Time,
    pub overhead_total: Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub per_rep: Vec<RepSummary>,
    pub mean_completed: f64,
    pub min_completed: usize,
    pub max_completed: usize,
    /// Set when the cell could not be run; `per_rep` is then empty.
    pub error: Option<String>,
}

impl ConditionResult {
    fn from_reps(condition: Condition, per_rep: Vec<RepSummary>) -> Self {
        let completed: Vec<usize> = per_rep.iter().map(|r| r.completed).collect();
        Self {
            condition,
            mean_completed: mean(&completed),
            min_completed: completed.iter().copied().min().unwrap_or(0),
            max_completed: completed.iter().copied().max().unwrap_or(0),
            per_rep,
            error: None,
        }
    }

    fn failed(condition: Condition, error: String) -> Self {
        Self {
            condition,
            per_rep: Vec::new(),
            mean_completed: f64::NAN,
            min_completed: 0,
            max_completed: 0,
            error: Some(error),
        }
    }
}

fn mean(values: &[usize]) -> f64 {
    values.iter().sum::<usize>() as f64 / values.len() as f64
}

fn run_cell(grid: &ExperimentGrid, cond: &Condition) -> Result<Vec<RepSummary>, String> {
    let spec = HeuristicSpec::new(grid.spec_kind, cond.w);
    let cfg = SimConfig::new(spec, cond.k, grid.overhead);
    (0..grid.replications)
        .map(|rep| {
            let seed = grid.seed_for(cond.n, cond.proc_range, cond.k, cond.w, rep);
            let ts = grid.task_set(cond.n, cond.proc_range, cond.k, cond.w, rep)?;
            let out = simulate(&ts, &cfg).map_err(|e| e.to_string())?;
            Ok(RepSummary {
                seed,
                completed: out.summary.completed,
                discarded: out.summary.discarded,
                makespan: out.summary.makespan,
                overhead_total: out.summary.overhead_total,
            })
        })
        .collect()
}

/// Runs every cell and replication. Cells run in parallel; the result is
/// sorted by condition, so output does not depend on scheduling.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<ConditionResult>, ExperimentError> {
    grid.validate()?;
    let mut results: Vec<ConditionResult> = grid
        .cells()
        .into_par_iter()
        .map(|cond| match run_cell(grid, &cond) {
            Ok(reps) => ConditionResult::from_reps(cond, reps),
            Err(e) => ConditionResult::failed(cond, e),
        })
        .collect();
    results.sort_by(|a, b| a.condition.cmp(&b.condition));
    Ok(results)
}

/// One CSV per `(n, proc_range, w)` group. Returns `(file name, contents)`
/// pairs in file-name order.
pub fn figure_tables(results: &[ConditionResult]) -> Result<Vec<(String, String)>, ExperimentError> {
    if results.is_empty() {
        return Err(ExperimentError::NoResults);
    }
    let mut groups: BTreeMap<(usize, TimeRange, Weight), Vec<&ConditionResult>> = BTreeMap::new();
    for r in results {
        let c = &r.condition;
        groups.entry((c.n, c.proc_range, c.w)).or_default().push(r);
    }
    let mut tables = Vec::with_capacity(groups.len());
    for ((n, proc_range, w), mut rows) in groups {
        rows.sort_by_key(|r| r.condition.k);
        let reps = rows.iter().map(|r| r.per_rep.len()).max().unwrap_or(0);
        let first = &rows[0].condition;
        let mut out = String::new();
        out.push_str(FIGURE_HEADER);
        out.push('\n');
        out.push_str(&format!(
            "# n={n} proc={proc_range} laxity={} w={w} heuristic={} prng={PRNG_NAME}\n",
            first.laxity, first.heuristic
        ));
        out.push('k');
        for i in 1..=reps {
            out.push_str(&format!(",rep_{i}"));
        }
        out.push_str(",mean\n");
        for r in rows {
            if let Some(e) = &r.error {
                out.push_str(&format!("# k={} failed: {}\n", r.condition.k, e.replace('\n', " ")));
                continue;
            }
            out.push_str(&r.condition.k.to_string());
            for rep in &r.per_rep {
                out.push_str(&format!(",{}", rep.completed));
            }
            out.push_str(&format!(",{}\n", r.mean_completed));
        }
        let name = format!("fig_n{n}_p{}-{}_w{}.csv", proc_range.lo, proc_range.hi, w);
        tables.push((name, out));
    }
    Ok(tables)
}

/// Writes the figure CSVs into `dir`, creating it if needed.
pub fn emit_figure_data(results: &[ConditionResult], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, ExperimentError> {
    let tables = figure_tables(results)?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(tables.len());
    for (name, contents) in tables {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}
