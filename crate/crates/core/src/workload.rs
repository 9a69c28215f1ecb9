//! Aperiodic task model, seeded workload generation and the workload file format.
//!
//! File format (UTF-8, one task per line):
//!
//! ```text
//! # myosched-workload v1
//! id,t_gen,t_proc,t_deadline,requests
//! 7,42,10,152,0x;2s
//! ```
//!
//! `requests` is `-` for none, otherwise `;`-joined `<resource_id><mode>` items
//! with mode `x` (exclusive) or `s` (shared). The column-name line is optional
//! on input.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::resource::{AccessMode, ResourceRequest};
use crate::Time;

pub type TaskId = usize;

pub const WORKLOAD_HEADER: &str = "# myosched-workload v1";
const COLUMNS: &str = "id,t_gen,t_proc,t_deadline,requests";

/// Name of the generator behind [`generate`], recorded next to results.
pub const PRNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload parameters: {0}")]
    InvalidParams(String),
    #[error("task {task_id}: invalid {field}: {reason}")]
    InvalidTask {
        task_id: TaskId,
        field: &'static str,
        reason: String,
    },
    #[error("task ids must be dense 0..{n}: {reason}")]
    BadIds { n: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One aperiodic, non-preemptive job.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub t_gen: Time,
    pub t_proc: Time,
    pub t_deadline: Time,
    pub requests: Vec<ResourceRequest>,
}

impl Task {
    pub fn new(id: TaskId, t_gen: Time, t_proc: Time, t_deadline: Time) -> Self {
        Self { id, t_gen, t_proc, t_deadline, requests: Vec::new() }
    }

    pub fn with_requests(mut self, requests: Vec<ResourceRequest>) -> Self {
        self.requests = requests;
        self
    }

    /// `t_deadline - t_gen - t_proc`: slack if started the moment it arrives.
    pub fn static_laxity(&self) -> i64 {
        self.t_deadline as i64 - self.t_gen as i64 - self.t_proc as i64
    }

    /// Latest start that still meets the deadline.
    pub fn latest_start(&self) -> Time {
        self.t_deadline - self.t_proc
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |field, reason: String| WorkloadError::InvalidTask { task_id: self.id, field, reason };
        if self.t_proc < 1 {
            return Err(bad("t_proc", "must be at least 1".into()));
        }
        if self.t_deadline < self.t_gen + self.t_proc {
            return Err(bad(
                "t_deadline",
                format!(
                    "{} is earlier than t_gen + t_proc = {}",
                    self.t_deadline,
                    self.t_gen + self.t_proc
                ),
            ));
        }
        let mut seen = BTreeSet::new();
        for req in &self.requests {
            if !seen.insert(req.resource_id) {
                return Err(bad("requests", format!("resource {} listed twice", req.resource_id)));
            }
        }
        Ok(())
    }

    fn requests_field(&self) -> String {
        if self.requests.is_empty() {
            "-".to_string()
        } else {
            self.requests.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
        }
    }
}

/// Tasks with dense ids `0..n`, stored in id order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSet {
    tasks: Vec<Task>,
    pub seed: u64,
}

impl TaskSet {
    /// Sorts by id and validates every task and the id sequence.
    pub fn new(mut tasks: Vec<Task>, seed: u64) -> Result<Self, WorkloadError> {
        tasks.sort_by_key(|t| t.id);
        let n = tasks.len();
        for (i, t) in tasks.iter().enumerate() {
            if t.id != i {
                let reason = if i > 0 && tasks[i - 1].id == t.id {
                    format!("duplicate id {}", t.id)
                } else {
                    format!("missing id {i}")
                };
                return Err(WorkloadError::BadIds { n, reason });
            }
            t.validate()?;
        }
        Ok(Self { tasks, seed })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn get(&self, id: TaskId) -> &Task {
        &self.tasks[id]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// One past the largest resource id requested by any task.
    pub fn n_resources(&self) -> usize {
        self.tasks
            .iter()
            .flat_map(|t| t.requests.iter().map(|r| r.resource_id + 1))
            .max()
            .unwrap_or(0)
    }

    /// Serialized workload file contents.
    pub fn to_file_string(&self) -> String {
        let mut out = String::with_capacity(32 * (self.tasks.len() + 2));
        out.push_str(WORKLOAD_HEADER);
        out.push('\n');
        out.push_str(COLUMNS);
        out.push('\n');
        for t in &self.tasks {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.id,
                t.t_gen,
                t.t_proc,
                t.t_deadline,
                t.requests_field()
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, WorkloadError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == WORKLOAD_HEADER => {}
            _ => {
                return Err(WorkloadError::Parse {
                    line: 1,
                    reason: format!("expected header `{WORKLOAD_HEADER}`"),
                })
            }
        }
        let mut tasks = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line == COLUMNS {
                continue;
            }
            let task = parse_row(line).map_err(|reason| WorkloadError::Parse { line: idx + 1, reason })?;
            tasks.push(task);
        }
        TaskSet::new(tasks, 0)
    }
}

fn parse_row(line: &str) -> Result<Task, String> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols.len() != 5 {
        return Err(format!("expected 5 comma-separated fields, found {}", cols.len()));
    }
    let num = |name: &str, s: &str| -> Result<u64, String> {
        s.parse::<u64>().map_err(|e| format!("{name} `{s}`: {e}"))
    };
    let id = num("id", cols[0])? as TaskId;
    let t_gen = num("t_gen", cols[1])?;
    let t_proc = num("t_proc", cols[2])?;
    let t_deadline = num("t_deadline", cols[3])?;
    let requests = if cols[4] == "-" {
        Vec::new()
    } else {
        cols[4].split(';').map(parse_request).collect::<Result<_, _>>()?
    };
    Ok(Task { id, t_gen, t_proc, t_deadline, requests })
}

fn parse_request(item: &str) -> Result<ResourceRequest, String> {
    let item = item.trim();
    let (digits, mode) = item.split_at(item.len().saturating_sub(1));
    let mode = match mode {
        "x" => AccessMode::Exclusive,
        "s" => AccessMode::Shared,
        _ => return Err(format!("request `{item}`: mode must be `x` or `s`")),
    };
    let resource_id = digits
        .parse::<usize>()
        .map_err(|e| format!("request `{item}`: resource id: {e}"))?;
    Ok(ResourceRequest { resource_id, mode })
}

pub fn load_workload(path: impl AsRef<Path>) -> Result<TaskSet, WorkloadError> {
    TaskSet::parse(&fs::read_to_string(path)?)
}

pub fn save_workload(ts: &TaskSet, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(ts.to_file_string().as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Inclusive integer range, written `lo..hi` on the command line and
/// `[lo, hi]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeRange {
    pub lo: Time,
    pub hi: Time,
}

impl TimeRange {
    pub fn new(lo: Time, hi: Time) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: Time) -> bool {
        self.lo <= t && t <= self.hi
    }
}

impl fmt::Display for TimeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for TimeRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<Time>().map_err(|e| format!("range `{s}`: {e}"));
        let range = match s.split_once("..") {
            Some((lo, hi)) => TimeRange::new(parse(lo)?, parse(hi.trim_start_matches('='))?),
            None => {
                let v = parse(s)?;
                TimeRange::new(v, v)
            }
        };
        if range.lo > range.hi {
            return Err(format!("range `{s}` is empty"));
        }
        Ok(range)
    }
}

impl Serialize for TimeRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lo, self.hi].serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimeRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lo, hi] = <[Time; 2]>::deserialize(d)?;
        if lo > hi {
            return Err(serde::de::Error::custom(format!("range [{lo}, {hi}] is empty")));
        }
        Ok(TimeRange { lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub n: usize,
    pub proc_range: TimeRange,
    pub laxity: Time,
    pub arrival_span: TimeRange,
    pub n_resources: usize,
    pub request_prob: f64,
    pub share_prob: f64,
}

impl WorkloadParams {
    /// Resource-free workload with the default arrival span `0..3`.
    pub fn new(n: usize, proc_range: TimeRange, laxity: Time) -> Self {
        Self {
            n,
            proc_range,
            laxity,
            arrival_span: TimeRange::new(0, 3),
            n_resources: 0,
            request_prob: 0.0,
            share_prob: 0.5,
        }
    }

    /// Adds the default resource mix: 3 resources, each requested with
    /// probability 0.2, half of the requests shared.
    pub fn with_default_resources(mut self) -> Self {
        self.n_resources = 3;
        self.request_prob = 0.2;
        self.share_prob = 0.5;
        self
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::InvalidParams(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.proc_range.lo < 1 {
            return bad(format!("proc_range {} must start at 1 or above", self.proc_range));
        }
        if self.proc_range.lo > self.proc_range.hi {
            return bad(format!("proc_range {} is empty", self.proc_range));
        }
        if self.arrival_span.lo > self.arrival_span.hi {
            return bad(format!("arrival_span {} is empty", self.arrival_span));
        }
        for (name, p) in [("request_prob", self.request_prob), ("share_prob", self.share_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Deterministic in `(params, seed)`.
///
/// Draw order per task: inter-arrival gap (skipped for task 0), processing
/// time, then for each resource a request coin and, if requested, a mode coin.
pub fn generate(params: &WorkloadParams, seed: u64) -> Result<TaskSet, WorkloadError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(params.n);
    let mut t_gen: Time = 0;
    for id in 0..params.n {
        if id > 0 {
            t_gen += rng.gen_range(params.arrival_span.lo..=params.arrival_span.hi);
        }
        let t_proc = rng.gen_range(params.proc_range.lo..=params.proc_range.hi);
        let mut requests = Vec::new();
        for resource_id in 0..params.n_resources {
            if rng.gen_bool(params.request_prob) {
                let mode = if rng.gen_bool(params.share_prob) {
                    AccessMode::Shared
                } else {
                    AccessMode::Exclusive
                };
                requests.push(ResourceRequest { resource_id, mode });
            }
        }
        tasks.push(Task {
            id,
            t_gen,
            t_proc,
            t_deadline: t_gen + t_proc + params.laxity,
            requests,
        });
    }
    TaskSet::new(tasks, seed)
}
