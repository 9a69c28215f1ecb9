//! Resource availability and earliest-start computation.
//!
//! A task may request any number of resources, each either exclusively or in
//! shared mode. Shared grants may overlap each other; an exclusive grant waits
//! for every outstanding grant on that resource. The CPU is a single
//! non-preemptive processor, tracked as one more "free at" time.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::Task;
use crate::Time;

pub type ResourceId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessMode {
    Shared,
    Exclusive,
}

impl AccessMode {
    pub fn code(self) -> char {
        match self {
            AccessMode::Shared => 's',
            AccessMode::Exclusive => 'x',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResourceRequest {
    pub resource_id: ResourceId,
    pub mode: AccessMode,
}

impl ResourceRequest {
    pub fn exclusive(resource_id: ResourceId) -> Self {
        Self { resource_id, mode: AccessMode::Exclusive }
    }

    pub fn shared(resource_id: ResourceId) -> Self {
        Self { resource_id, mode: AccessMode::Shared }
    }
}

impl fmt::Display for ResourceRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.resource_id, self.mode.code())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ResourceError {
    #[error("task {task_id} requests unknown resource {resource_id} (system has {n_resources})")]
    UnknownResource {
        task_id: usize,
        resource_id: ResourceId,
        n_resources: usize,
    },
    #[error("task {task_id} committed at {start}, before its earliest start {earliest}")]
    StartBeforeEarliest { task_id: usize, start: Time, earliest: Time },
}

/// Earliest times at which one resource can next be granted in each mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceSlot {
    pub free_at_exclusive: Time,
    pub free_at_shared: Time,
}

impl ResourceSlot {
    fn free_at(&self, mode: AccessMode) -> Time {
        match mode {
            AccessMode::Exclusive => self.free_at_exclusive,
            AccessMode::Shared => self.free_at_shared,
        }
    }
}

/// Snapshot of when the CPU and every resource become available.
///
/// Values are cheap to clone; `commit` returns a new table so callers can keep
/// speculative copies around.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AvailabilityTable {
    pub cpu_free_at: Time,
    pub slots: Vec<ResourceSlot>,
}

impl AvailabilityTable {
    pub fn new(n_resources: usize) -> Self {
        Self { cpu_free_at: 0, slots: vec![ResourceSlot::default(); n_resources] }
    }

    pub fn n_resources(&self) -> usize {
        self.slots.len()
    }

    /// `max(t_gen, cpu_free_at, free_at of each requested resource in its mode)`.
    pub fn earliest_start(&self, task: &Task) -> Result<Time, ResourceError> {
        let mut est = task.t_gen.max(self.cpu_free_at);
        for req in &task.requests {
            let slot = self.slot(task, req.resource_id)?;
            est = est.max(slot.free_at(req.mode));
        }
        Ok(est)
    }

    /// Returns the table after running `task` from `start` to completion.
    pub fn commit(&self, task: &Task, start: Time) -> Result<AvailabilityTable, ResourceError> {
        let earliest = self.earliest_start(task)?;
        if start < earliest {
            return Err(ResourceError::StartBeforeEarliest { task_id: task.id, start, earliest });
        }
        let mut next = self.clone();
        next.commit_in_place(task, start);
        Ok(next)
    }

    /// Unchecked commit. The caller has already established `start >= earliest_start`.
    pub(crate) fn commit_in_place(&mut self, task: &Task, start: Time) {
        let end = start + task.t_proc;
        self.cpu_free_at = self.cpu_free_at.max(end);
        for req in &task.requests {
            let slot = &mut self.slots[req.resource_id];
            match req.mode {
                AccessMode::Exclusive => {
                    slot.free_at_exclusive = slot.free_at_exclusive.max(end);
                    slot.free_at_shared = slot.free_at_shared.max(end);
                }
                AccessMode::Shared => {
                    slot.free_at_exclusive = slot.free_at_exclusive.max(end);
                }
            }
        }
    }

    fn slot(&self, task: &Task, resource_id: ResourceId) -> Result<&ResourceSlot, ResourceError> {
        self.slots.get(resource_id).ok_or(ResourceError::UnknownResource {
            task_id: task.id,
            resource_id,
            n_resources: self.slots.len(),
        })
    }
}
