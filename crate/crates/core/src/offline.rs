//! Offline schedule construction: the Original heuristic algorithm and its
//! Myopic, window-limited variant.
//!
//! Both start from an empty partial schedule and grow it one task at a time.
//! The tasks not yet scheduled are kept sorted by `(t_deadline, id)`. At each
//! step the first `N_K = min(k, N_R)` of them form the window: the heuristic
//! picks the minimum-H window task, the pick is placed at its earliest start,
//! and the placement is kept only if every task in the next window can still
//! meet its deadline (strong feasibility). With `k` unbounded the window is
//! the whole remaining set, which is the Original algorithm.
//!
//! On a failed step the scheduler either aborts or backtracks: the rejected
//! pick is forbidden at that step and the next-best window task is tried; when
//! a step runs out of candidates, the previous commit is undone and forbidden
//! at its own step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::{best_of, HeuristicError, HeuristicSpec};
use crate::resource::{AvailabilityTable, ResourceError};
use crate::workload::{TaskId, TaskSet};
use crate::Time;

pub const SCHEDULE_HEADER: &str = "# myosched-schedule v1";

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid build configuration: {0}")]
    InvalidConfig(String),
    #[error("window is empty: no remaining tasks")]
    EmptyWindow,
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
}

/// Feasibility-check window `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WindowSize {
    Bounded(usize),
    /// Consider every remaining task: the Original algorithm.
    Unbounded,
}

impl WindowSize {
    /// `N_K = min(k, n_remaining)`.
    pub fn considered(self, n_remaining: usize) -> usize {
        match self {
            WindowSize::Bounded(k) => k.min(n_remaining),
            WindowSize::Unbounded => n_remaining,
        }
    }
}

impl fmt::Display for WindowSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowSize::Bounded(k) => write!(f, "{k}"),
            WindowSize::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl FromStr for WindowSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "unbounded" => Ok(WindowSize::Unbounded),
            other => match other.parse::<usize>() {
                Ok(0) => Err("window size must be at least 1".into()),
                Ok(k) => Ok(WindowSize::Bounded(k)),
                Err(_) => Err(format!("window size `{other}`: expected a positive integer or `unbounded`")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OnInfeasible {
    Abort,
    Backtrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BuildConfig {
    pub spec: HeuristicSpec,
    pub k: WindowSize,
    pub max_backtracks: usize,
    pub on_infeasible: OnInfeasible,
}

impl BuildConfig {
    pub fn abort(spec: HeuristicSpec, k: WindowSize) -> Self {
        Self { spec, k, max_backtracks: 0, on_infeasible: OnInfeasible::Abort }
    }

    pub fn backtracking(spec: HeuristicSpec, k: WindowSize, max_backtracks: usize) -> Self {
        Self { spec, k, max_backtracks, on_infeasible: OnInfeasible::Backtrack }
    }

    /// Backtracking with a budget of `10 * n` undo steps.
    pub fn with_default_budget(spec: HeuristicSpec, k: WindowSize, n: usize) -> Self {
        Self::backtracking(spec, k, 10 * n)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.k == WindowSize::Bounded(0) {
            return Err(ScheduleError::InvalidConfig("window size must be at least 1".into()));
        }
        if self.on_infeasible == OnInfeasible::Abort && self.max_backtracks != 0 {
            return Err(ScheduleError::InvalidConfig("max_backtracks must be 0 when aborting".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduledEntry {
    pub task_id: TaskId,
    pub start: Time,
    pub finish: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BuildOutcome {
    Feasible(Vec<ScheduledEntry>),
    Infeasible { partial_len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BuildResult {
    pub outcome: BuildOutcome,
    pub h_evals: u64,
    pub feas_checks: u64,
    pub backtracks_used: u64,
}

impl BuildResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self.outcome, BuildOutcome::Feasible(_))
    }

    pub fn schedule(&self) -> Option<&[ScheduledEntry]> {
        match &self.outcome {
            BuildOutcome::Feasible(s) => Some(s),
            BuildOutcome::Infeasible { .. } => None,
        }
    }

    /// Schedule CSV: version line, column names, one row per entry, and a
    /// `#` trailer carrying the counters and outcome.
    pub fn to_csv(&self, ts: &TaskSet) -> String {
        let mut out = String::new();
        out.push_str(SCHEDULE_HEADER);
        out.push('\n');
        out.push_str("task_id,start,finish,t_deadline\n");
        for e in self.schedule().unwrap_or_default() {
            out.push_str(&format!("{},{},{},{}\n", e.task_id, e.start, e.finish, ts.get(e.task_id).t_deadline));
        }
        let outcome = match &self.outcome {
            BuildOutcome::Feasible(_) => "feasible".to_string(),
            BuildOutcome::Infeasible { partial_len } => format!("infeasible,partial_len={partial_len}"),
        };
        out.push_str(&format!(
            "# h_evals={},feas_checks={},backtracks={},outcome={}\n",
            self.h_evals, self.feas_checks, self.backtracks_used, outcome
        ));
        out
    }
}

/// One committed step, kept so it can be undone.
#[derive(Debug, Clone)]
struct Frame {
    avail_before: AvailabilityTable,
    remaining_pos: usize,
    /// Choices already rejected at this step, not counting the committed one.
    forbidden: Vec<TaskId>,
}

/// Mutable state of one schedule construction.
#[derive(Debug, Clone)]
pub struct SchedulerState<'a> {
    ts: &'a TaskSet,
    pub partial: Vec<ScheduledEntry>,
    /// Unscheduled task ids sorted by `(t_deadline, id)`.
    pub remaining: Vec<TaskId>,
    pub avail: AvailabilityTable,
    pub k: WindowSize,
    pub h_evals: u64,
    pub feas_checks: u64,
    pub backtracks_used: u64,
}

impl<'a> SchedulerState<'a> {
    pub fn new(ts: &'a TaskSet, k: WindowSize) -> Self {
        let mut remaining: Vec<TaskId> = (0..ts.len()).collect();
        remaining.sort_by_key(|&id| (ts.get(id).t_deadline, id));
        Self {
            ts,
            partial: Vec::with_capacity(ts.len()),
            remaining,
            avail: AvailabilityTable::new(ts.n_resources()),
            k,
            h_evals: 0,
            feas_checks: 0,
            backtracks_used: 0,
        }
    }

    pub fn task_set(&self) -> &'a TaskSet {
        self.ts
    }

    /// The first `N_K` remaining ids: the tasks considered at this step.
    pub fn window(&self) -> Result<&[TaskId], ScheduleError> {
        if self.remaining.is_empty() {
            return Err(ScheduleError::EmptyWindow);
        }
        Ok(&self.remaining[..self.k.considered(self.remaining.len())])
    }

    /// Tests every task in the window that would follow placing `after` (if
    /// any) against the availability after that placement, each independently.
    /// Stops at the first task that would miss its deadline. Only the
    /// `feas_checks` counter is updated.
    pub fn strongly_feasible(&mut self, after: Option<(TaskId, Time)>) -> Result<bool, ScheduleError> {
        let mut spec_avail;
        let avail = match after {
            Some((id, start)) => {
                debug_assert!(self.remaining.contains(&id));
                spec_avail = self.avail.clone();
                spec_avail.commit_in_place(self.ts.get(id), start);
                &spec_avail
            }
            None => &self.avail,
        };
        let skip = after.map(|(id, _)| id);
        let n_remaining = self.remaining.len() - usize::from(skip.is_some());
        let n_k = self.k.considered(n_remaining);
        let window = self.remaining.iter().copied().filter(|&id| Some(id) != skip).take(n_k);
        for id in window {
            let task = self.ts.get(id);
            self.feas_checks += 1;
            if avail.earliest_start(task)? + task.t_proc > task.t_deadline {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn commit(&mut self, task_id: TaskId, start: Time, forbidden: Vec<TaskId>) -> Frame {
        let task = self.ts.get(task_id);
        let frame = Frame {
            avail_before: self.avail.clone(),
            remaining_pos: self.remaining.iter().position(|&id| id == task_id).expect("task is remaining"),
            forbidden,
        };
        self.avail.commit_in_place(task, start);
        self.remaining.remove(frame.remaining_pos);
        self.partial.push(ScheduledEntry { task_id, start, finish: start + task.t_proc });
        frame
    }

    fn undo(&mut self, frame: Frame) -> TaskId {
        let entry = self.partial.pop().expect("frame has a matching entry");
        self.avail = frame.avail_before;
        self.remaining.insert(frame.remaining_pos, entry.task_id);
        entry.task_id
    }
}

/// Builds a schedule for `ts` under `cfg`. Deterministic in `(ts, cfg)`.
pub fn build(ts: &TaskSet, cfg: &BuildConfig) -> Result<BuildResult, ScheduleError> {
    cfg.validate()?;
    let mut state = SchedulerState::new(ts, cfg.k);
    let mut frames: Vec<Frame> = Vec::with_capacity(ts.len());
    let mut forbidden: Vec<TaskId> = Vec::new();

    let finish = |state: &SchedulerState<'_>, outcome| BuildResult {
        outcome,
        h_evals: state.h_evals,
        feas_checks: state.feas_checks,
        backtracks_used: state.backtracks_used,
    };

    while !state.remaining.is_empty() {
        let mut candidates = Vec::with_capacity(cfg.k.considered(state.remaining.len()));
        for &id in state.window()? {
            if forbidden.contains(&id) {
                continue;
            }
            let task = ts.get(id);
            candidates.push((task, state.avail.earliest_start(task)?));
        }
        state.h_evals += candidates.len() as u64;
        let best = best_of(candidates, cfg.spec)?;

        let accepted = match best {
            Some(v) => {
                let task = ts.get(v.task_id);
                v.est_used + task.t_proc <= task.t_deadline
                    && state.strongly_feasible(Some((v.task_id, v.est_used)))?
            }
            None => false,
        };
        if let (true, Some(v)) = (accepted, best) {
            let frame = state.commit(v.task_id, v.est_used, std::mem::take(&mut forbidden));
            frames.push(frame);
            continue;
        }

        let budget_left = state.backtracks_used < cfg.max_backtracks as u64;
        if cfg.on_infeasible == OnInfeasible::Abort || !budget_left {
            return Ok(finish(&state, BuildOutcome::Infeasible { partial_len: state.partial.len() }));
        }
        match best {
            // Change the latest choice: try the next-best candidate at this step.
            Some(v) => forbidden.push(v.task_id),
            // Nothing left to try here: undo the previous commit.
            None => match frames.pop() {
                Some(frame) => {
                    let mut prev_forbidden = frame.forbidden.clone();
                    prev_forbidden.push(state.undo(frame));
                    forbidden = prev_forbidden;
                }
                None => {
                    return Ok(finish(&state, BuildOutcome::Infeasible { partial_len: 0 }));
                }
            },
        }
        state.backtracks_used += 1;
    }
    let schedule = std::mem::take(&mut state.partial);
    Ok(finish(&state, BuildOutcome::Feasible(schedule)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{HeuristicKind, Weight};
    use crate::workload::Task;

    fn set(tasks: Vec<Task>) -> TaskSet {
        TaskSet::new(tasks, 0).unwrap()
    }

    fn edf() -> HeuristicSpec {
        HeuristicSpec::min_deadline()
    }

    #[test]
    fn window_prefixes() {
        let ts = set((0..4).map(|i| Task::new(i, 0, 1, 100 + i as Time)).collect());
        let state = SchedulerState::new(&ts, WindowSize::Bounded(10));
        assert_eq!(state.window().unwrap(), &[0, 1, 2, 3]);

        // Deadline order is ids 3, 1, 2, 0.
        let ts = set(vec![
            Task::new(0, 0, 1, 40),
            Task::new(1, 0, 1, 20),
            Task::new(2, 0, 1, 30),
            Task::new(3, 0, 1, 10),
        ]);
        let state = SchedulerState::new(&ts, WindowSize::Bounded(2));
        assert_eq!(state.remaining, vec![3, 1, 2, 0]);
        assert_eq!(state.window().unwrap(), &[3, 1]);
        let state = SchedulerState::new(&ts, WindowSize::Unbounded);
        assert_eq!(state.window().unwrap().len(), 4);
    }

    #[test]
    fn empty_window_is_an_error() {
        let ts = set(vec![Task::new(0, 0, 1, 5)]);
        let mut state = SchedulerState::new(&ts, WindowSize::Bounded(1));
        state.remaining.clear();
        assert!(matches!(state.window(), Err(ScheduleError::EmptyWindow)));
    }

    #[test]
    fn strong_feasibility_edge_cases() {
        let ts = set(vec![Task::new(0, 0, 5, 100)]);
        let mut state = SchedulerState::new(&ts, WindowSize::Bounded(3));
        assert!(state.strongly_feasible(Some((0, 0))).unwrap());
        assert_eq!(state.feas_checks, 0);

        let ts = set(vec![Task::new(0, 0, 15, 15), Task::new(1, 0, 10, 20)]);
        let mut state = SchedulerState::new(&ts, WindowSize::Bounded(3));
        // After placing task 0 at 0 the CPU is busy until 15 and 15 + 10 > 20.
        assert!(!state.strongly_feasible(Some((0, 0))).unwrap());
        assert_eq!(state.feas_checks, 1);
        assert_eq!(state.partial.len(), 0);
        assert_eq!(state.avail.cpu_free_at, 0);
    }

    #[test]
    fn single_task() {
        let ts = set(vec![Task::new(0, 0, 5, 100)]);
        for k in [WindowSize::Bounded(1), WindowSize::Bounded(4), WindowSize::Unbounded] {
            for kind in HeuristicKind::ALL {
                let r = build(&ts, &BuildConfig::abort(HeuristicSpec::new(kind, Weight::HALF), k)).unwrap();
                assert_eq!(r.schedule().unwrap(), &[ScheduledEntry { task_id: 0, start: 0, finish: 5 }]);
            }
        }
    }

    #[test]
    fn only_feasible_order() {
        let ts = set(vec![Task::new(0, 0, 10, 10), Task::new(1, 0, 10, 20)]);
        let r = build(&ts, &BuildConfig::abort(edf(), WindowSize::Bounded(2))).unwrap();
        assert_eq!(
            r.schedule().unwrap(),
            &[ScheduledEntry { task_id: 0, start: 0, finish: 10 }, ScheduledEntry { task_id: 1, start: 10, finish: 20 }]
        );
    }

    #[test]
    fn backtracking_recovers_a_bad_heuristic_choice() {
        // Shortest-first picks task 1, after which task 0 cannot make its deadline.
        let ts = set(vec![Task::new(0, 0, 10, 10), Task::new(1, 0, 5, 30)]);
        let spec = HeuristicSpec::unweighted(HeuristicKind::MinProc);
        let r = build(&ts, &BuildConfig::abort(spec, WindowSize::Unbounded)).unwrap();
        assert_eq!(r.outcome, BuildOutcome::Infeasible { partial_len: 0 });

        let r = build(&ts, &BuildConfig::backtracking(spec, WindowSize::Unbounded, 5)).unwrap();
        assert_eq!(r.backtracks_used, 1);
        let order: Vec<_> = r.schedule().unwrap().iter().map(|e| e.task_id).collect();
        assert_eq!(order, vec![0, 1]);
    }

    #[test]
    fn backtracking_undoes_earlier_commits() {
        // With k = 1 every step has one candidate, so a failure has to unwind
        // commits until the budget runs out.
        let ts = set(vec![Task::new(0, 0, 5, 20), Task::new(1, 0, 5, 21), Task::new(2, 0, 20, 22)]);
        let r = build(&ts, &BuildConfig::backtracking(edf(), WindowSize::Bounded(1), 3)).unwrap();
        assert!(!r.is_feasible());
        assert_eq!(r.backtracks_used, 2);
    }

    #[test]
    fn config_validation() {
        let mut cfg = BuildConfig::abort(edf(), WindowSize::Bounded(2));
        cfg.max_backtracks = 3;
        assert!(matches!(cfg.validate(), Err(ScheduleError::InvalidConfig(_))));
        let cfg = BuildConfig::abort(edf(), WindowSize::Bounded(0));
        assert!(cfg.validate().is_err());
        assert!("0".parse::<WindowSize>().is_err());
        assert_eq!("unbounded".parse::<WindowSize>().unwrap(), WindowSize::Unbounded);
        assert_eq!("6".parse::<WindowSize>().unwrap(), WindowSize::Bounded(6));
    }

    #[test]
    fn csv_layout() {
        let ts = set(vec![Task::new(0, 0, 10, 10), Task::new(1, 0, 10, 20)]);
        let r = build(&ts, &BuildConfig::abort(edf(), WindowSize::Bounded(2))).unwrap();
        let csv = r.to_csv(&ts);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SCHEDULE_HEADER);
        assert_eq!(lines[2], "0,0,10,10");
        assert_eq!(lines[3], "1,10,20,20");
        assert_eq!(
            lines[4],
            format!("# h_evals={},feas_checks={},backtracks=0,outcome=feasible", r.h_evals, r.feas_checks)
        );
    }
}
