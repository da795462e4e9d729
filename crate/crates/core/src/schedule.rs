//! Step-wise solution construction.
//!
//! A schedule is built by a sequence of job selections. Selecting job `j`
//! appends its ready operation to the permutation of that operation's
//! machine, starting it as early as both the job and the machine allow.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Time};

/// Incremental construction state over a borrowed instance.
#[derive(Debug, Clone)]
pub struct PartialSchedule<'a> {
    inst: &'a Instance,
    t: usize,
    /// Local index (within the job) of each job's ready operation.
    next_op: Vec<usize>,
    job_ready: Vec<Time>,
    mach_ready: Vec<Time>,
    perm: Vec<Vec<usize>>,
    start: Vec<Option<Time>>,
    completion: Vec<Option<Time>>,
    decisions: Vec<usize>,
    makespan: Time,
}

impl<'a> PartialSchedule<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let n = inst.num_jobs();
        let m = inst.num_machines();
        let o = inst.num_ops();
        Self {
            inst,
            t: 0,
            next_op: vec![0; n],
            job_ready: vec![0; n],
            mach_ready: vec![0; m],
            perm: vec![Vec::new(); m],
            start: vec![None; o],
            completion: vec![None; o],
            decisions: Vec::with_capacity(o),
            makespan: 0,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    /// Number of decisions taken so far.
    pub fn step_count(&self) -> usize {
        self.t
    }

    pub fn is_complete(&self) -> bool {
        self.t == self.inst.num_ops()
    }

    pub fn is_job_done(&self, job: usize) -> bool {
        self.next_op[job] >= self.inst.job_len(job)
    }

    /// Global index of the ready operation of `job`, if any.
    pub fn ready_op(&self, job: usize) -> Option<usize> {
        (!self.is_job_done(job)).then(|| self.inst.job_start(job) + self.next_op[job])
    }

    /// Count of operations of `job` already scheduled.
    pub fn scheduled_in_job(&self, job: usize) -> usize {
        self.next_op[job]
    }

    pub fn legal_jobs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.inst.num_jobs()).filter(move |&j| !self.is_job_done(j))
    }

    /// Completion time of the last scheduled operation of each job.
    pub fn job_ready(&self) -> &[Time] {
        &self.job_ready
    }

    /// Completion time of the last operation on each machine.
    pub fn machine_ready(&self) -> &[Time] {
        &self.mach_ready
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.perm
    }

    pub fn start(&self, op: usize) -> Option<Time> {
        self.start[op]
    }

    pub fn completion(&self, op: usize) -> Option<Time> {
        self.completion[op]
    }

    pub fn decisions(&self) -> &[usize] {
        &self.decisions
    }

    /// Largest completion time among scheduled operations (0 when empty).
    pub fn makespan(&self) -> Time {
        self.makespan
    }

    /// Schedules the ready operation of `job`; returns its global index.
    pub fn step(&mut self, job: usize) -> Result<usize> {
        if job >= self.inst.num_jobs() {
            return Err(Error::JobOutOfRange {
                job,
                num_jobs: self.inst.num_jobs(),
            });
        }
        let op = self.ready_op(job).ok_or(Error::JobCompleted { job })?;
        let operation = self.inst.op(op);
        let begin = self.job_ready[job].max(self.mach_ready[operation.machine]);
        let end = begin + operation.duration;
        self.start[op] = Some(begin);
        self.completion[op] = Some(end);
        self.perm[operation.machine].push(op);
        self.job_ready[job] = end;
        self.mach_ready[operation.machine] = end;
        self.next_op[job] += 1;
        self.decisions.push(job);
        self.makespan = self.makespan.max(end);
        self.t += 1;
        Ok(op)
    }

    pub fn into_solution(self) -> Result<Solution> {
        if !self.is_complete() {
            return Err(Error::ScheduleIncomplete {
                scheduled: self.t,
                total: self.inst.num_ops(),
            });
        }
        Ok(Solution {
            perm: self.perm,
            start: self
                .start
                .into_iter()
                .map(Option::unwrap_or_default)
                .collect(),
            completion: self
                .completion
                .into_iter()
                .map(Option::unwrap_or_default)
                .collect(),
            makespan: self.makespan,
            decisions: self.decisions,
        })
    }
}

/// A complete schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    /// Operation order on each machine.
    pub perm: Vec<Vec<usize>>,
    pub start: Vec<Time>,
    pub completion: Vec<Time>,
    pub makespan: Time,
    /// Job selected at each construction step.
    pub decisions: Vec<usize>,
}

impl Solution {
    /// Replays a full decision sequence.
    pub fn from_decisions(inst: &Instance, decisions: &[usize]) -> Result<Self> {
        let mut s = PartialSchedule::new(inst);
        for &j in decisions {
            s.step(j)?;
        }
        s.into_solution()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A vector or permutation table has the wrong length.
    Shape(String),
    /// Machine permutation is not exactly the set of that machine's operations.
    NotAPermutation {
        machine: usize,
    },
    Precedence {
        op: usize,
    },
    MachineOverlap {
        machine: usize,
        first: usize,
        second: usize,
    },
    Duration {
        op: usize,
    },
    MakespanMismatch {
        reported: Time,
        actual: Time,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(msg) => write!(f, "shape: {msg}"),
            Violation::NotAPermutation { machine } => {
                write!(
                    f,
                    "machine {machine}: sequence is not a permutation of its operations"
                )
            }
            Violation::Precedence { op } => {
                write!(
                    f,
                    "operation {op} starts before its job predecessor completes"
                )
            }
            Violation::MachineOverlap {
                machine,
                first,
                second,
            } => write!(
                f,
                "machine {machine}: operation {second} starts before {first} completes"
            ),
            Violation::Duration { op } => {
                write!(f, "operation {op}: completion != start + duration")
            }
            Violation::MakespanMismatch { reported, actual } => {
                write!(f, "makespan mismatch: reported {reported}, actual {actual}")
            }
        }
    }
}

/// Checks a solution for feasibility and internal consistency.
pub fn validate_solution(inst: &Instance, sol: &Solution) -> Result<(), Vec<Violation>> {
    let o = inst.num_ops();
    let mut violations = Vec::new();
    if sol.start.len() != o || sol.completion.len() != o {
        violations.push(Violation::Shape(format!(
            "expected {o} start/completion times, found {}/{}",
            sol.start.len(),
            sol.completion.len()
        )));
        return Err(violations);
    }
    if sol.perm.len() != inst.num_machines() {
        violations.push(Violation::Shape(format!(
            "expected {} machine sequences, found {}",
            inst.num_machines(),
            sol.perm.len()
        )));
        return Err(violations);
    }

    for (machine, seq) in sol.perm.iter().enumerate() {
        let mut sorted = seq.clone();
        sorted.sort_unstable();
        if sorted != inst.machine_ops(machine) {
            violations.push(Violation::NotAPermutation { machine });
            continue;
        }
        for pair in seq.windows(2) {
            if sol.start[pair[1]] < sol.completion[pair[0]] {
                violations.push(Violation::MachineOverlap {
                    machine,
                    first: pair[0],
                    second: pair[1],
                });
            }
        }
    }
    for job in 0..inst.num_jobs() {
        for i in inst.job_ops(job).skip(1) {
            if sol.start[i] < sol.completion[i - 1] {
                violations.push(Violation::Precedence { op: i });
            }
        }
    }
    for i in 0..o {
        if sol.start[i].checked_add(inst.op(i).duration) != Some(sol.completion[i]) {
            violations.push(Violation::Duration { op: i });
        }
    }
    let actual = sol.completion.iter().copied().max().unwrap_or(0);
    if actual != sol.makespan {
        violations.push(Violation::MakespanMismatch {
            reported: sol.makespan,
            actual,
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
