//! Insertion heuristic.
//!
//! The graph always holds every job route; only machine sequences are
//! partial. Start with the machine sequences of the longest job, then insert
//! the other operations by decreasing duration. Each operation goes to the
//! position of its machine sequence that minimizes the longest path through
//! it (then the makespan, then the earliest position). Positions that would
//! close a cycle are skipped.

use crate::error::{Error, Result};
use crate::instance::{Instance, Time};
use crate::schedule::Solution;

const NONE: usize = usize::MAX;

struct Partial<'a> {
    inst: &'a Instance,
    perm: Vec<Vec<usize>>,
    job_prev: Vec<usize>,
    job_next: Vec<usize>,
    mach_prev: Vec<usize>,
    mach_next: Vec<usize>,
    // Scratch for longest paths.
    indeg: Vec<u32>,
    head: Vec<Time>,
    tail: Vec<Time>,
    order: Vec<usize>,
}

/// Insertion of `op` between `before` and `after` on its machine.
#[derive(Clone, Copy)]
struct Candidate {
    op: usize,
    before: usize,
    after: usize,
}

impl<'a> Partial<'a> {
    fn new(inst: &'a Instance) -> Self {
        let o = inst.num_ops();
        let mut job_prev = vec![NONE; o];
        let mut job_next = vec![NONE; o];
        for j in 0..inst.num_jobs() {
            let r = inst.job_ops(j);
            for x in r.start + 1..r.end {
                job_prev[x] = x - 1;
                job_next[x - 1] = x;
            }
        }
        Self {
            inst,
            perm: vec![Vec::new(); inst.num_machines()],
            job_prev,
            job_next,
            mach_prev: vec![NONE; o],
            mach_next: vec![NONE; o],
            indeg: vec![0; o],
            head: vec![0; o],
            tail: vec![0; o],
            order: Vec::with_capacity(o),
        }
    }

    fn candidate(&self, op: usize, pos: usize) -> Candidate {
        let perm = &self.perm[self.inst.op(op).machine];
        Candidate {
            op,
            before: if pos == 0 { NONE } else { perm[pos - 1] },
            after: perm.get(pos).copied().unwrap_or(NONE),
        }
    }

    fn mach_pred(&self, x: usize, c: Option<&Candidate>) -> usize {
        match c {
            Some(c) if x == c.op => c.before,
            Some(c) if x == c.after => c.op,
            _ => self.mach_prev[x],
        }
    }

    fn mach_succ(&self, x: usize, c: Option<&Candidate>) -> usize {
        match c {
            Some(c) if x == c.op => c.after,
            Some(c) if x == c.before => c.op,
            _ => self.mach_next[x],
        }
    }

    /// Heads and makespan with `c` applied, or `None` on a cycle. Leaves a
    /// topological order in `order`.
    fn longest_path(&mut self, c: Option<&Candidate>) -> Option<Time> {
        let o = self.inst.num_ops();
        self.order.clear();
        for x in 0..o {
            let deg = u32::from(self.job_prev[x] != NONE) + u32::from(self.mach_pred(x, c) != NONE);
            self.indeg[x] = deg;
            self.head[x] = 0;
            if deg == 0 {
                self.order.push(x);
            }
        }
        let mut makespan = 0;
        let mut i = 0;
        while i < self.order.len() {
            let x = self.order[i];
            i += 1;
            let done = self.head[x] + self.inst.op(x).duration;
            makespan = makespan.max(done);
            for y in [self.job_next[x], self.mach_succ(x, c)] {
                if y == NONE {
                    continue;
                }
                self.head[y] = self.head[y].max(done);
                self.indeg[y] -= 1;
                if self.indeg[y] == 0 {
                    self.order.push(y);
                }
            }
        }
        (self.order.len() == o).then_some(makespan)
    }

    /// Length of the longest path through `c.op`; call after `longest_path(Some(c))`.
    fn path_through(&mut self, c: &Candidate) -> Time {
        for i in (0..self.order.len()).rev() {
            let x = self.order[i];
            let mut t = 0;
            for y in [self.job_next[x], self.mach_succ(x, Some(c))] {
                if y != NONE {
                    t = t.max(self.tail[y] + self.inst.op(y).duration);
                }
            }
            self.tail[x] = t;
        }
        self.head[c.op] + self.inst.op(c.op).duration + self.tail[c.op]
    }

    fn apply(&mut self, c: Candidate, pos: usize) {
        self.perm[self.inst.op(c.op).machine].insert(pos, c.op);
        self.mach_prev[c.op] = c.before;
        self.mach_next[c.op] = c.after;
        if c.before != NONE {
            self.mach_next[c.before] = c.op;
        }
        if c.after != NONE {
            self.mach_prev[c.after] = c.op;
        }
    }

    fn insert_best(&mut self, op: usize) -> Result<()> {
        let len = self.perm[self.inst.op(op).machine].len();
        let mut best: Option<((Time, Time), usize)> = None;
        for pos in 0..=len {
            let c = self.candidate(op, pos);
            let Some(makespan) = self.longest_path(Some(&c)) else {
                continue;
            };
            let key = (self.path_through(&c), makespan);
            if best.is_none_or(|(b, _)| key < b) {
                best = Some((key, pos));
            }
        }
        let (_, pos) = best.ok_or_else(|| {
            Error::InvalidInstance(format!("no acyclic insertion position for operation {op}"))
        })?;
        self.apply(self.candidate(op, pos), pos);
        Ok(())
    }
}

pub fn insa(inst: &Instance) -> Result<Solution> {
    let mut p = Partial::new(inst);
    let first = (0..inst.num_jobs())
        .max_by_key(|&j| (inst.job_total_duration(j), std::cmp::Reverse(j)))
        .ok_or(Error::Empty("instance"))?;
    for op in inst.job_ops(first) {
        let pos = p.perm[inst.op(op).machine].len();
        p.apply(p.candidate(op, pos), pos);
    }
    let mut rest: Vec<usize> = (0..inst.num_ops())
        .filter(|&o| inst.job_of(o) != first)
        .collect();
    rest.sort_by_key(|&o| (std::cmp::Reverse(inst.op(o).duration), o));
    for op in rest {
        p.insert_best(op)?;
    }
    p.longest_path(None)
        .ok_or_else(|| Error::InvalidInstance("insertion produced a cycle".into()))?;
    // Appending in topological order reproduces the earliest start times.
    let decisions: Vec<usize> = p.order.iter().map(|&o| inst.job_of(o)).collect();
    Solution::from_decisions(inst, &decisions)
}
