//! Exhaustive search over the construction decision tree, for tiny instances.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::instance::{Instance, Time};
use crate::schedule::{PartialSchedule, Solution};

pub const DEFAULT_OP_LIMIT: usize = 12;

/// Minimum makespan over every complete decision sequence.
///
/// Depth-first search memoized on `(next operation per job, job frontiers,
/// machine frontiers)`, which fully determines the reachable completions.
pub fn brute_force_optimum(inst: &Instance, op_limit: usize) -> Result<(Time, Solution)> {
    if inst.num_ops() > op_limit {
        return Err(Error::TooLarge {
            ops: inst.num_ops(),
            limit: op_limit,
        });
    }
    let mut memo = HashMap::new();
    let root = PartialSchedule::new(inst);
    let best = search(&root, &mut memo);

    // Walk down the tree following children that attain the optimum.
    let mut s = root;
    while !s.is_complete() {
        let next = s
            .legal_jobs()
            .map(|j| {
                let mut child = s.clone();
                child.step(j).expect("legal job");
                child
            })
            .find(|child| search(child, &mut memo) == best)
            .expect("optimal child exists");
        s = next;
    }
    Ok((best, s.into_solution()?))
}

type Key = (Vec<usize>, Vec<Time>, Vec<Time>);

fn key(s: &PartialSchedule<'_>) -> Key {
    let n = s.instance().num_jobs();
    (
        (0..n).map(|j| s.scheduled_in_job(j)).collect(),
        s.job_ready().to_vec(),
        s.machine_ready().to_vec(),
    )
}

fn search(s: &PartialSchedule<'_>, memo: &mut HashMap<Key, Time>) -> Time {
    if s.is_complete() {
        return s.makespan();
    }
    let k = key(s);
    if let Some(&v) = memo.get(&k) {
        return v;
    }
    let best = s
        .legal_jobs()
        .map(|j| {
            let mut child = s.clone();
            child.step(j).expect("legal job");
            search(&child, memo)
        })
        .min()
        .expect("incomplete schedule has a legal job");
    memo.insert(k, best);
    best
}

/// Every complete decision sequence, in lexicographic order.
pub fn enumerate_sequences(inst: &Instance, op_limit: usize) -> Result<Vec<Vec<usize>>> {
    if inst.num_ops() > op_limit {
        return Err(Error::TooLarge {
            ops: inst.num_ops(),
            limit: op_limit,
        });
    }
    let mut remaining: Vec<usize> = (0..inst.num_jobs()).map(|j| inst.job_len(j)).collect();
    let mut prefix = Vec::with_capacity(inst.num_ops());
    let mut out = Vec::new();
    fn rec(
        remaining: &mut [usize],
        prefix: &mut Vec<usize>,
        total: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if prefix.len() == total {
            out.push(prefix.clone());
            return;
        }
        for j in 0..remaining.len() {
            if remaining[j] > 0 {
                remaining[j] -= 1;
                prefix.push(j);
                rec(remaining, prefix, total, out);
                prefix.pop();
                remaining[j] += 1;
            }
        }
    }
    rec(&mut remaining, &mut prefix, inst.num_ops(), &mut out);
    Ok(out)
}
