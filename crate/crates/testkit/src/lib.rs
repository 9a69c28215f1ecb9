//! Reference oracles for the myosched test suites.
//!
//! Everything here is written from the task model alone and shares no code
//! with the scheduler or simulator it is used to check: earliest start times
//! are recomputed by replaying committed intervals, feasibility is decided by
//! trying every task order, and the reference simulator advances its clock one
//! tick at a time.

use myosched::heuristics::HeuristicKind;
use myosched::offline::ScheduledEntry;
use myosched::resource::{AccessMode, ResourceRequest};
use myosched::{HeuristicSpec, Task, TaskId, TaskSet, Time};
use rand::Rng;

/// Earliest start of `task` after the given tasks have run in the given
/// intervals: arrival, end of every committed run (one CPU), and the end of
/// every conflicting grant on a requested resource.
pub fn replay_est(ts: &TaskSet, committed: &[(TaskId, Time)], task: &Task) -> Time {
    let mut est = task.t_gen;
    for &(id, start) in committed {
        let other = ts.get(id);
        let end = start + other.t_proc;
        est = est.max(end);
        for want in &task.requests {
            for held in &other.requests {
                let conflict = want.resource_id == held.resource_id
                    && (want.mode == AccessMode::Exclusive || held.mode == AccessMode::Exclusive);
                if conflict {
                    est = est.max(end);
                }
            }
        }
    }
    est
}

/// Some order in which running every task at its earliest start meets every
/// deadline, or `None` if no order works. Exhaustive over permutations, with a
/// prefix cut once a deadline is missed.
pub fn feasible_order(ts: &TaskSet) -> Option<Vec<TaskId>> {
    fn extend(ts: &TaskSet, used: &mut Vec<bool>, prefix: &mut Vec<(TaskId, Time)>) -> bool {
        if prefix.len() == ts.len() {
            return true;
        }
        for id in 0..ts.len() {
            if used[id] {
                continue;
            }
            let task = ts.get(id);
            let start = replay_est(ts, prefix, task);
            if start + task.t_proc > task.t_deadline {
                continue;
            }
            used[id] = true;
            prefix.push((id, start));
            if extend(ts, used, prefix) {
                return true;
            }
            prefix.pop();
            used[id] = false;
        }
        false
    }
    let mut used = vec![false; ts.len()];
    let mut prefix = Vec::with_capacity(ts.len());
    extend(ts, &mut used, &mut prefix).then(|| prefix.into_iter().map(|(id, _)| id).collect())
}

/// Checks a complete schedule: every task exactly once, starts at its replayed
/// earliest start (hence after arrival), finishes by its deadline, no two runs
/// overlap on the CPU, and overlapping grants on a resource are all shared.
pub fn validate_schedule(ts: &TaskSet, entries: &[ScheduledEntry]) -> Result<(), String> {
    if entries.len() != ts.len() {
        return Err(format!("{} entries for {} tasks", entries.len(), ts.len()));
    }
    let mut seen = vec![false; ts.len()];
    let mut committed: Vec<(TaskId, Time)> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        if e.task_id >= ts.len() || seen[e.task_id] {
            return Err(format!("entry {i}: task {} unknown or repeated", e.task_id));
        }
        seen[e.task_id] = true;
        let task = ts.get(e.task_id);
        if e.start < task.t_gen {
            return Err(format!("entry {i}: starts at {} before arrival {}", e.start, task.t_gen));
        }
        let est = replay_est(ts, &committed, task);
        if e.start != est {
            return Err(format!("entry {i}: starts at {}, earliest start is {est}", e.start));
        }
        if e.finish != e.start + task.t_proc {
            return Err(format!("entry {i}: finish {} != start + t_proc", e.finish));
        }
        if e.finish > task.t_deadline {
            return Err(format!("entry {i}: finishes at {} after deadline {}", e.finish, task.t_deadline));
        }
        committed.push((e.task_id, e.start));
    }
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            let overlap = a.start < b.finish && b.start < a.finish;
            if !overlap {
                continue;
            }
            return Err(format!("tasks {} and {} overlap on the CPU", a.task_id, b.task_id));
        }
    }
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            if !(a.start < b.finish && b.start < a.finish) {
                continue;
            }
            for ra in &ts.get(a.task_id).requests {
                for rb in &ts.get(b.task_id).requests {
                    if ra.resource_id == rb.resource_id
                        && (ra.mode == AccessMode::Exclusive || rb.mode == AccessMode::Exclusive)
                    {
                        return Err(format!("tasks {} and {} hold resource {} in conflicting modes", a.task_id, b.task_id, ra.resource_id));
                    }
                }
            }
        }
    }
    Ok(())
}

/// H scaled by the weight's denominator, so comparisons stay in integers.
pub fn scaled_h(task: &Task, est: Time, spec: HeuristicSpec) -> i128 {
    let r = spec.w().ratio();
    let (num, den) = (*r.numer() as i128, *r.denom() as i128);
    let d = task.t_deadline as i128;
    let p = task.t_proc as i128;
    let e = est as i128;
    match spec.kind() {
        HeuristicKind::MinDeadline => d * den,
        HeuristicKind::MinProc => p * den,
        HeuristicKind::MinEst => e * den,
        HeuristicKind::MinLaxity => (d - e - p) * den,
        HeuristicKind::DeadlinePlusWeightedProc => d * den + num * p,
        HeuristicKind::DeadlinePlusWeightedEst => d * den + num * e,
    }
}

/// Linear scan for the smallest `(H, t_deadline, id)`.
pub fn scan_argmin(candidates: &[(&Task, Time)], spec: HeuristicSpec) -> Option<TaskId> {
    let mut best: Option<((i128, Time, TaskId), TaskId)> = None;
    for &(task, est) in candidates {
        let key = (scaled_h(task, est, spec), task.t_deadline, task.id);
        if best.map_or(true, |(k, _)| key < k) {
            best = Some((key, task.id));
        }
    }
    best.map(|(_, id)| id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceOutcome {
    pub completed: usize,
    pub discarded: usize,
    pub makespan: Time,
    pub overhead_total: Time,
}

/// Naive online execution: the clock moves one tick at a time while idle, the
/// pending list is rebuilt and re-sorted from scratch at every look.
pub fn reference_simulate(ts: &TaskSet, spec: HeuristicSpec, k: usize, c0: Time, c1: Time) -> ReferenceOutcome {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Waiting,
        Gone,
    }
    let n = ts.len();
    let mut state = vec![State::Waiting; n];
    let mut ran: Vec<(TaskId, Time)> = Vec::new();
    let mut out = ReferenceOutcome { completed: 0, discarded: 0, makespan: 0, overhead_total: 0 };
    let mut clock: Time = 0;

    let est_at = |ran: &[(TaskId, Time)], task: &Task, clock: Time| replay_est(ts, ran, task).max(clock);

    let pending_at = |state: &[State], clock: Time| -> Vec<TaskId> {
        let mut p: Vec<TaskId> = (0..n).filter(|&i| state[i] == State::Waiting && ts.get(i).t_gen <= clock).collect();
        p.sort_by(|&a, &b| (ts.get(a).t_deadline, a).cmp(&(ts.get(b).t_deadline, b)));
        p
    };

    let discard = |state: &mut [State], ran: &[(TaskId, Time)], clock: Time, out: &mut ReferenceOutcome| {
        for id in pending_at(state, clock) {
            let task = ts.get(id);
            if est_at(ran, task, clock) + task.t_proc > task.t_deadline {
                state[id] = State::Gone;
                out.discarded += 1;
            }
        }
    };

    while state.iter().any(|&s| s == State::Waiting) {
        discard(&mut state, &ran, clock, &mut out);
        if pending_at(&state, clock).is_empty() {
            clock += 1;
            continue;
        }
        let n_k = k.min(pending_at(&state, clock).len());
        let cost = c0 + c1 * n_k as Time;
        clock += cost;
        out.overhead_total += cost;
        discard(&mut state, &ran, clock, &mut out);
        let pending = pending_at(&state, clock);
        if pending.is_empty() {
            continue;
        }
        let window: Vec<(&Task, Time)> = pending
            .iter()
            .take(k)
            .map(|&id| (ts.get(id), est_at(&ran, ts.get(id), clock)))
            .collect();
        let pick = scan_argmin(&window, spec).expect("window is non-empty");
        let task = ts.get(pick);
        let start = est_at(&ran, task, clock);
        let finish = start + task.t_proc;
        state[pick] = State::Gone;
        ran.push((pick, start));
        if finish <= task.t_deadline {
            out.completed += 1;
        }
        out.makespan = finish;
        clock = finish;
    }
    out
}

/// Small random task set with mixed laxities and, optionally, resource requests.
pub fn random_task_set<R: Rng>(rng: &mut R, n: usize, max_laxity: Time, n_resources: usize) -> TaskSet {
    let mut t_gen = 0;
    let tasks = (0..n)
        .map(|id| {
            if id > 0 {
                t_gen += rng.gen_range(0..=6);
            }
            let t_proc = rng.gen_range(1..=10);
            let laxity = rng.gen_range(0..=max_laxity);
            let mut requests = Vec::new();
            for r in 0..n_resources {
                if rng.gen_bool(0.3) {
                    let mode = if rng.gen_bool(0.5) { AccessMode::Shared } else { AccessMode::Exclusive };
                    requests.push(ResourceRequest { resource_id: r, mode });
                }
            }
            Task { id, t_gen, t_proc, t_deadline: t_gen + t_proc + laxity, requests }
        })
        .collect();
    TaskSet::new(tasks, 0).expect("generated tasks are valid")
}
