//! Discrete-time online execution on one non-preemptive CPU.
//!
//! Tasks become pending at `t_gen`. Whenever the CPU is free the scheduler is
//! invoked:
//!
//! 1. pending tasks that can no longer finish by their deadline are discarded;
//! 2. with nothing pending, the clock jumps to the next arrival;
//! 3. otherwise the decision is charged `c0 + c1 * N_K` time units, where
//!    `N_K = min(k, pending)`;
//! 4. arrivals during that time are admitted and the discard rule is applied
//!    again at the new clock;
//! 5. the minimum-H task among the first `min(k, pending)` pending tasks (in
//!    `(t_deadline, id)` order) is dispatched at its earliest start and runs to
//!    completion.
//!
//! The trace records every arrival, decision, dispatch, finish and discard and
//! can be checked independently with [`replay_validate`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::{best_of, HeuristicError, HeuristicSpec};
use crate::resource::{AvailabilityTable, ResourceError};
use crate::workload::{TaskId, TaskSet};
use crate::Time;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error("trace line {line}: {reason}")]
    TraceParse { line: usize, reason: String },
}

/// Scheduling cost charged to the simulated clock: `c0 + c1 * N_K` per decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OverheadModel {
    pub c0: Time,
    pub c1: Time,
}

impl OverheadModel {
    pub const ZERO: OverheadModel = OverheadModel { c0: 0, c1: 0 };

    pub fn new(c0: Time, c1: Time) -> Self {
        Self { c0, c1 }
    }

    pub fn cost(&self, n_k: usize) -> Time {
        self.c0 + self.c1 * n_k as Time
    }
}

impl Default for OverheadModel {
    fn default() -> Self {
        Self { c0: 1, c1: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimConfig {
    pub spec: HeuristicSpec,
    pub k: usize,
    pub overhead: OverheadModel,
    pub horizon: Option<Time>,
}

impl SimConfig {
    pub fn new(spec: HeuristicSpec, k: usize, overhead: OverheadModel) -> Self {
        Self { spec, k, overhead, horizon: None }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.k == 0 {
            return Err(SimError::InvalidConfig("window size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Arrive { t: Time, task_id: TaskId },
    /// A scheduling decision started at `t` over `n_k` tasks and cost `cost`.
    Decide { t: Time, n_k: usize, cost: Time },
    /// `candidates` is the number of window tasks whose H was evaluated.
    Dispatch { t: Time, task_id: TaskId, candidates: usize },
    Finish { t: Time, task_id: TaskId },
    Discard { t: Time, task_id: TaskId },
}

impl TraceEvent {
    pub fn t(&self) -> Time {
        match *self {
            TraceEvent::Arrive { t, .. }
            | TraceEvent::Decide { t, .. }
            | TraceEvent::Dispatch { t, .. }
            | TraceEvent::Finish { t, .. }
            | TraceEvent::Discard { t, .. } => t,
        }
    }

    pub fn task_id(&self) -> Option<TaskId> {
        match *self {
            TraceEvent::Decide { .. } => None,
            TraceEvent::Arrive { task_id, .. }
            | TraceEvent::Dispatch { task_id, .. }
            | TraceEvent::Finish { task_id, .. }
            | TraceEvent::Discard { task_id, .. } => Some(task_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimSummary {
    pub completed: usize,
    pub discarded: usize,
    pub makespan: Time,
    pub overhead_total: Time,
    /// The run stopped at the horizon with work left over.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimOutcome {
    pub summary: SimSummary,
    pub trace: Vec<TraceEvent>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SummaryLine {
    Summary(SimSummary),
}

impl SimOutcome {
    pub fn completed(&self) -> usize {
        self.summary.completed
    }

    pub fn discarded(&self) -> usize {
        self.summary.discarded
    }

    /// `key=value` line for stdout.
    pub fn summary_line(&self) -> String {
        let s = &self.summary;
        format!(
            "completed={} discarded={} makespan={} overhead_total={} truncated={}",
            s.completed, s.discarded, s.makespan, s.overhead_total, s.truncated
        )
    }

    /// JSON lines: one object per event, then a `"kind":"summary"` object.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::with_capacity(48 * (self.trace.len() + 1));
        for ev in &self.trace {
            out.push_str(&serde_json::to_string(ev).expect("events serialize"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&SummaryLine::Summary(self.summary)).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let mut trace = Vec::new();
        let mut summary = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| SimError::TraceParse { line: idx + 1, reason };
            if summary.is_some() {
                return Err(err("content after the summary line".into()));
            }
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if value.get("kind").and_then(|k| k.as_str()) == Some("summary") {
                let SummaryLine::Summary(s) = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
                summary = Some(s);
            } else {
                trace.push(serde_json::from_value(value).map_err(|e| err(e.to_string()))?);
            }
        }
        let summary = summary.ok_or(SimError::TraceParse {
            line: text.lines().count(),
            reason: "missing summary line".into(),
        })?;
        Ok(SimOutcome { summary, trace })
    }
}

struct Engine<'a> {
    ts: &'a TaskSet,
    cfg: &'a SimConfig,
    /// Arrived, unstarted tasks keyed by `(t_deadline, id)`.
    pending: BTreeSet<(Time, TaskId)>,
    next_arrival: usize,
    avail: AvailabilityTable,
    trace: Vec<TraceEvent>,
    summary: SimSummary,
}

impl Engine<'_> {
    fn admit(&mut self, now: Time) {
        let tasks = self.ts.tasks();
        while let Some(task) = tasks.get(self.next_arrival) {
            if task.t_gen > now {
                break;
            }
            self.trace.push(TraceEvent::Arrive { t: task.t_gen, task_id: task.id });
            self.pending.insert((task.t_deadline, task.id));
            self.next_arrival += 1;
        }
    }

    /// Drops every pending task that cannot finish in time if started at `now`.
    fn discard_hopeless(&mut self, now: Time) -> Result<(), SimError> {
        self.avail.cpu_free_at = self.avail.cpu_free_at.max(now);
        let mut dropped = Vec::new();
        for &(deadline, id) in &self.pending {
            let task = self.ts.get(id);
            if self.avail.earliest_start(task)? + task.t_proc > deadline {
                dropped.push((deadline, id));
            }
        }
        for key in dropped {
            self.pending.remove(&key);
            self.trace.push(TraceEvent::Discard { t: now, task_id: key.1 });
            self.summary.discarded += 1;
        }
        Ok(())
    }

    fn drained(&self) -> bool {
        self.pending.is_empty() && self.next_arrival == self.ts.len()
    }

    fn run(mut self) -> Result<SimOutcome, SimError> {
        let mut now: Time = 0;
        loop {
            if let Some(h) = self.cfg.horizon {
                if now >= h {
                    self.summary.truncated = !self.drained();
                    break;
                }
            }
            self.admit(now);
            self.discard_hopeless(now)?;
            if self.pending.is_empty() {
                match self.ts.tasks().get(self.next_arrival) {
                    Some(task) => {
                        now = now.max(task.t_gen);
                        continue;
                    }
                    None => break,
                }
            }

            let n_k = self.cfg.k.min(self.pending.len());
            let cost = self.cfg.overhead.cost(n_k);
            self.trace.push(TraceEvent::Decide { t: now, n_k, cost });
            self.summary.overhead_total += cost;
            now += cost;

            self.admit(now);
            self.discard_hopeless(now)?;
            if self.pending.is_empty() {
                continue;
            }

            let window: Vec<_> = self.pending.iter().take(self.cfg.k).map(|&(_, id)| self.ts.get(id)).collect();
            let mut candidates = Vec::with_capacity(window.len());
            for task in &window {
                candidates.push((*task, self.avail.earliest_start(task)?));
            }
            let n_candidates = candidates.len();
            let best = best_of(candidates, self.cfg.spec)?.expect("window is non-empty");
            let task = self.ts.get(best.task_id);
            let start = best.est_used;
            self.pending.remove(&(task.t_deadline, task.id));
            self.trace.push(TraceEvent::Dispatch { t: start, task_id: task.id, candidates: n_candidates });
            self.avail.commit_in_place(task, start);

            let finish = start + task.t_proc;
            self.admit(finish);
            self.trace.push(TraceEvent::Finish { t: finish, task_id: task.id });
            if finish <= task.t_deadline {
                self.summary.completed += 1;
            }
            self.summary.makespan = finish;
            now = finish;
        }
        Ok(SimOutcome { summary: self.summary, trace: self.trace })
    }
}

/// Runs `ts` online under `cfg`. Deterministic in `(ts, cfg)`.
pub fn simulate(ts: &TaskSet, cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    Engine {
        ts,
        cfg,
        pending: BTreeSet::new(),
        next_arrival: 0,
        avail: AvailabilityTable::new(ts.n_resources()),
        trace: Vec::with_capacity(ts.len() * 4),
        summary: SimSummary { completed: 0, discarded: 0, makespan: 0, overhead_total: 0, truncated: false },
    }
    .run()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: {reason}", match .event { Some(i) => format!("event {i}"), None => "summary".to_string() })]
pub struct TraceViolation {
    /// Index into the trace, or `None` for a summary mismatch.
    pub event: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskStatus {
    Unseen,
    Pending,
    Running,
    Done,
    Discarded,
}

/// Re-walks `outcome.trace` against `ts`.
///
/// Checks time order, arrivals at `t_gen`, one dispatch per decision at the
/// decision's end, non-overlapping non-preemptive execution, that every
/// dispatched task could meet its deadline, that every discard was forced, and
/// that the summary agrees with the trace.
pub fn replay_validate(ts: &TaskSet, outcome: &SimOutcome) -> Result<(), TraceViolation> {
    let n = ts.len();
    let mut status = vec![TaskStatus::Unseen; n];
    let mut last_t: Time = 0;
    let mut running: Option<(TaskId, Time)> = None;
    let mut open_decision: Option<Time> = None;
    let mut n_pending = 0usize;
    let (mut completed, mut discarded, mut makespan, mut overhead) = (0usize, 0usize, 0, 0);

    for (i, ev) in outcome.trace.iter().enumerate() {
        let fail = |reason: String| Err(TraceViolation { event: Some(i), reason });
        let t = ev.t();
        if t < last_t {
            return fail(format!("time {t} goes backwards from {last_t}"));
        }
        last_t = t;
        if let Some(id) = ev.task_id() {
            if id >= n {
                return fail(format!("unknown task {id}"));
            }
        }
        match *ev {
            TraceEvent::Arrive { t, task_id } => {
                if status[task_id] != TaskStatus::Unseen {
                    return fail(format!("task {task_id} arrives twice"));
                }
                if t != ts.get(task_id).t_gen {
                    return fail(format!("task {task_id} arrives at {t}, generated at {}", ts.get(task_id).t_gen));
                }
                status[task_id] = TaskStatus::Pending;
                n_pending += 1;
            }
            TraceEvent::Decide { t, n_k, cost } => {
                if let Some((id, _)) = running {
                    return fail(format!("decision while task {id} is running"));
                }
                if n_k == 0 || n_k > n_pending {
                    return fail(format!("decision over {n_k} tasks with {n_pending} pending"));
                }
                open_decision = Some(t + cost);
                overhead += cost;
            }
            TraceEvent::Dispatch { t, task_id, candidates } => {
                if let Some((id, _)) = running {
                    return fail(format!("task {task_id} dispatched while task {id} is running"));
                }
                if status[task_id] != TaskStatus::Pending {
                    return fail(format!("task {task_id} dispatched while {:?}", status[task_id]));
                }
                match open_decision.take() {
                    Some(end) if end == t => {}
                    Some(end) => return fail(format!("dispatch at {t}, decision ended at {end}")),
                    None => return fail(format!("task {task_id} dispatched without a decision")),
                }
                if candidates == 0 {
                    return fail("dispatch evaluated no candidates".into());
                }
                let task = ts.get(task_id);
                if t + task.t_proc > task.t_deadline {
                    return fail(format!("task {task_id} dispatched at {t} cannot meet deadline {}", task.t_deadline));
                }
                status[task_id] = TaskStatus::Running;
                n_pending -= 1;
                running = Some((task_id, t));
            }
            TraceEvent::Finish { t, task_id } => {
                let Some((id, start)) = running.take() else {
                    return fail(format!("task {task_id} finishes but nothing is running"));
                };
                if id != task_id {
                    return fail(format!("task {task_id} finishes while task {id} is running"));
                }
                let task = ts.get(task_id);
                if t != start + task.t_proc {
                    return fail(format!("task {task_id} finishes at {t}, expected {}", start + task.t_proc));
                }
                status[task_id] = TaskStatus::Done;
                if t <= task.t_deadline {
                    completed += 1;
                }
                makespan = t;
            }
            TraceEvent::Discard { t, task_id } => {
                if status[task_id] != TaskStatus::Pending {
                    return fail(format!("task {task_id} discarded while {:?}", status[task_id]));
                }
                if let Some((id, _)) = running {
                    return fail(format!("discard while task {id} is running"));
                }
                let task = ts.get(task_id);
                if t + task.t_proc <= task.t_deadline {
                    return fail(format!("task {task_id} discarded at {t} but could still finish by {}", task.t_deadline));
                }
                status[task_id] = TaskStatus::Discarded;
                n_pending -= 1;
                discarded += 1;
            }
        }
    }

    let s = &outcome.summary;
    let fail = |reason: String| Err(TraceViolation { event: None, reason });
    if !s.truncated {
        if let Some((id, _)) = running {
            return fail(format!("task {id} never finishes"));
        }
        if let Some(id) = status.iter().position(|&st| matches!(st, TaskStatus::Unseen | TaskStatus::Pending)) {
            return fail(format!("task {id} is neither run nor discarded"));
        }
    }
    if s.completed != completed {
        return fail(format!("completed = {}, trace has {completed}", s.completed));
    }
    if s.discarded != discarded {
        return fail(format!("discarded = {}, trace has {discarded}", s.discarded));
    }
    if s.makespan != makespan {
        return fail(format!("makespan = {}, trace ends at {makespan}", s.makespan));
    }
    if s.overhead_total != overhead {
        return fail(format!("overhead_total = {}, decisions sum to {overhead}", s.overhead_total));
    }
    Ok(())
}
