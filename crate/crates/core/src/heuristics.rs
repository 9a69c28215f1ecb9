//! Heuristic priority functions and minimum-H selection.
//!
//! Every H is evaluated in exact rational arithmetic: times are integers and
//! the weight is a ratio, so two runs on different machines pick the same task.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::workload::{Task, TaskId};
use crate::Time;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeuristicError {
    #[error("no candidates to choose from")]
    NoCandidates,
    #[error("invalid weight `{0}`: expected a non-negative decimal or ratio")]
    BadWeight(String),
    #[error("unknown heuristic `{0}`; expected min_d, min_p, min_est, min_laxity, d+w*p:<w> or d+w*est:<w>")]
    UnknownSpec(String),
    #[error("estimated start {est} precedes task {task_id}'s generation time {t_gen}")]
    EstBeforeArrival { task_id: TaskId, est: Time, t_gen: Time },
}

/// Non-negative exact weight `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight(Ratio<i64>);

impl Weight {
    pub const ZERO: Weight = Weight(Ratio::new_raw(0, 1));
    pub const HALF: Weight = Weight(Ratio::new_raw(1, 2));
    pub const ONE: Weight = Weight(Ratio::new_raw(1, 1));

    pub fn new(numer: i64, denom: i64) -> Result<Self, HeuristicError> {
        if denom == 0 || (numer < 0) != (denom < 0) && numer != 0 {
            return Err(HeuristicError::BadWeight(format!("{numer}/{denom}")));
        }
        Ok(Weight(Ratio::new(numer, denom)))
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }

    pub fn is_zero(self) -> bool {
        *self.0.numer() == 0
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl FromStr for Weight {
    type Err = HeuristicError;

    /// Accepts `0.5`, `1`, `1.0`, `3/4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HeuristicError::BadWeight(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            return Weight::new(n, d).map_err(|_| bad());
        }
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        if int_part.is_empty() && frac_part.is_empty()
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || frac_part.len() > 12
        {
            return Err(bad());
        }
        let denom = 10i64.pow(frac_part.len() as u32);
        let int: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
        let numer = int.checked_mul(denom).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        Ok(Weight(Ratio::new(numer, denom)))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = (*self.0.numer(), *self.0.denom());
        // Print as a decimal when the denominator divides some power of ten.
        let mut digits = 0u32;
        let mut scale = 1i64;
        while scale % d != 0 && digits < 12 {
            scale *= 10;
            digits += 1;
        }
        if scale % d == 0 {
            let scaled = n * (scale / d);
            let int = scaled / scale;
            let frac = scaled % scale;
            if digits == 0 {
                write!(f, "{int}.0")
            } else {
                write!(f, "{int}.{:0width$}", frac, width = digits as usize)
            }
        } else {
            write!(f, "{n}/{d}")
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            // `{}` prints the shortest decimal that round-trips, so 0.5 -> "0.5".
            Raw::Num(v) => format!("{v}"),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeuristicKind {
    #[serde(rename = "min_d")]
    MinDeadline,
    #[serde(rename = "min_p")]
    MinProc,
    #[serde(rename = "min_est")]
    MinEst,
    #[serde(rename = "min_laxity")]
    MinLaxity,
    #[serde(rename = "d+w*p")]
    DeadlinePlusWeightedProc,
    #[serde(rename = "d+w*est")]
    DeadlinePlusWeightedEst,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::MinDeadline => "min_d",
            HeuristicKind::MinProc => "min_p",
            HeuristicKind::MinEst => "min_est",
            HeuristicKind::MinLaxity => "min_laxity",
            HeuristicKind::DeadlinePlusWeightedProc => "d+w*p",
            HeuristicKind::DeadlinePlusWeightedEst => "d+w*est",
        }
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, HeuristicKind::DeadlinePlusWeightedProc | HeuristicKind::DeadlinePlusWeightedEst)
    }

    pub const ALL: [HeuristicKind; 6] = [
        HeuristicKind::MinDeadline,
        HeuristicKind::MinProc,
        HeuristicKind::MinEst,
        HeuristicKind::MinLaxity,
        HeuristicKind::DeadlinePlusWeightedProc,
        HeuristicKind::DeadlinePlusWeightedEst,
    ];
}

/// A heuristic formula plus its weight. Unweighted kinds always carry `w = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeuristicSpec {
    kind: HeuristicKind,
    w: Weight,
}

impl HeuristicSpec {
    pub fn new(kind: HeuristicKind, w: Weight) -> Self {
        let w = if kind.is_weighted() { w } else { Weight::ZERO };
        Self { kind, w }
    }

    pub fn unweighted(kind: HeuristicKind) -> Self {
        Self::new(kind, Weight::ZERO)
    }

    pub fn min_deadline() -> Self {
        Self::unweighted(HeuristicKind::MinDeadline)
    }

    /// `T_D + W * T_EST`.
    pub fn deadline_plus_weighted_est(w: Weight) -> Self {
        Self::new(HeuristicKind::DeadlinePlusWeightedEst, w)
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    pub fn w(&self) -> Weight {
        self.w
    }
}

impl fmt::Display for HeuristicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind.is_weighted() {
            write!(f, "{}:{}", self.kind.name(), self.w)
        } else {
            f.write_str(self.kind.name())
        }
    }
}

impl FromStr for HeuristicSpec {
    type Err = HeuristicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, w) = match s.split_once(':') {
            Some((name, w)) => (name, Some(w.parse::<Weight>()?)),
            None => (s, None),
        };
        let kind = HeuristicKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| HeuristicError::UnknownSpec(s.to_string()))?;
        match (kind.is_weighted(), w) {
            (true, Some(w)) => Ok(HeuristicSpec::new(kind, w)),
            (false, None) => Ok(HeuristicSpec::unweighted(kind)),
            _ => Err(HeuristicError::UnknownSpec(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicValue {
    pub h: Ratio<i64>,
    pub task_id: TaskId,
    pub est_used: Time,
}

/// H for `task` assuming it starts at `est`. Laxity may come out negative.
pub fn eval_h(task: &Task, est: Time, spec: HeuristicSpec) -> Result<HeuristicValue, HeuristicError> {
    if est < task.t_gen {
        return Err(HeuristicError::EstBeforeArrival { task_id: task.id, est, t_gen: task.t_gen });
    }
    let d = task.t_deadline as i64;
    let p = task.t_proc as i64;
    let e = est as i64;
    let w = spec.w.ratio();
    let h = match spec.kind {
        HeuristicKind::MinDeadline => Ratio::from_integer(d),
        HeuristicKind::MinProc => Ratio::from_integer(p),
        HeuristicKind::MinEst => Ratio::from_integer(e),
        HeuristicKind::MinLaxity => Ratio::from_integer(d - e - p),
        HeuristicKind::DeadlinePlusWeightedProc => Ratio::from_integer(d) + w * p,
        HeuristicKind::DeadlinePlusWeightedEst => Ratio::from_integer(d) + w * e,
    };
    Ok(HeuristicValue { h, task_id: task.id, est_used: est })
}

/// Total order used for selection: smaller H, then earlier deadline, then smaller id.
pub fn compare(a: (&HeuristicValue, &Task), b: (&HeuristicValue, &Task)) -> Ordering {
    a.0.h
        .cmp(&b.0.h)
        .then(a.1.t_deadline.cmp(&b.1.t_deadline))
        .then(a.1.id.cmp(&b.1.id))
}

/// The candidate with the smallest H, ties broken by deadline then id.
pub fn argmin_h(candidates: &[(&Task, Time)], spec: HeuristicSpec) -> Result<TaskId, HeuristicError> {
    best_of(candidates.iter().copied(), spec)?
        .map(|v| v.task_id)
        .ok_or(HeuristicError::NoCandidates)
}

pub(crate) fn best_of<'a>(
    candidates: impl IntoIterator<Item = (&'a Task, Time)>,
    spec: HeuristicSpec,
) -> Result<Option<HeuristicValue>, HeuristicError> {
    let mut best: Option<(HeuristicValue, &Task)> = None;
    for (task, est) in candidates {
        let v = eval_h(task, est, spec)?;
        let better = match &best {
            None => true,
            Some((bv, bt)) => compare((&v, task), (bv, bt)) == Ordering::Less,
        };
        if better {
            best = Some((v, task));
        }
    }
    Ok(best.map(|(v, _)| v))
}
