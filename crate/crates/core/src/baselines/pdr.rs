//! Priority dispatching rules over the job-selection process.
//!
//! At each step the eligible jobs are those whose ready operation could start
//! at the earliest possible time; the rule ranks them and the chosen job's
//! operation is appended to its machine as usual.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{Instance, Time};
use crate::rng;
use crate::schedule::{PartialSchedule, Solution};
use crate::train::pseudo_label_index;

/// How many top-ranked jobs a randomized rule chooses from.
pub const TOP_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Shortest processing time of the ready operation.
    Spt,
    /// Most work remaining.
    Mwr,
    /// Most operations remaining.
    Mor,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Spt, Rule::Mwr, Rule::Mor];

    fn prefers_larger(self) -> bool {
        !matches!(self, Rule::Spt)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Spt => "spt",
            Rule::Mwr => "mwr",
            Rule::Mor => "mor",
        })
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spt" => Ok(Rule::Spt),
            "mwr" => Ok(Rule::Mwr),
            "mor" => Ok(Rule::Mor),
            other => Err(Error::Config(format!("unknown rule '{other}'"))),
        }
    }
}

/// Priority value of every job; `None` for completed jobs.
pub fn pdr_priority(rule: Rule, s: &PartialSchedule<'_>) -> Vec<Option<Time>> {
    let inst = s.instance();
    (0..inst.num_jobs())
        .map(|j| {
            let op = s.ready_op(j)?;
            Some(match rule {
                Rule::Spt => inst.op(op).duration,
                Rule::Mwr => inst
                    .job_ops(j)
                    .skip(op - inst.job_start(j))
                    .map(|o| inst.op(o).duration)
                    .sum(),
                Rule::Mor => (inst.job_len(j) - s.scheduled_in_job(j)) as Time,
            })
        })
        .collect()
}

/// Remaining work from each operation to the end of its job.
fn remaining_work(inst: &Instance) -> Vec<Time> {
    let mut rem = vec![0; inst.num_ops()];
    for j in 0..inst.num_jobs() {
        let mut acc = 0;
        for op in inst.job_ops(j).rev() {
            acc += inst.op(op).duration;
            rem[op] = acc;
        }
    }
    rem
}

/// Builds one solution; `choose(k)` picks a rank in `0..k` among the best
/// `min(k, TOP_K)` eligible jobs, ranked by priority and then by job index.
fn construct(
    rule: Rule,
    inst: &Instance,
    rem: &[Time],
    mut choose: impl FnMut(usize) -> usize,
) -> Result<Solution> {
    let mut s = PartialSchedule::new(inst);
    let mut top: Vec<(Time, usize)> = Vec::with_capacity(TOP_K + 1);
    let better = |a: &(Time, usize), b: &(Time, usize)| -> Ordering {
        let by_value = if rule.prefers_larger() {
            b.0.cmp(&a.0)
        } else {
            a.0.cmp(&b.0)
        };
        by_value.then(a.1.cmp(&b.1))
    };
    let mut est = vec![Time::MAX; inst.num_jobs()];
    while !s.is_complete() {
        top.clear();
        // Only jobs whose ready operation can start earliest compete
        // (non-delay dispatching).
        let mut earliest = Time::MAX;
        for (j, e) in est.iter_mut().enumerate() {
            *e = match s.ready_op(j) {
                Some(op) => s.job_ready()[j].max(s.machine_ready()[inst.op(op).machine]),
                None => Time::MAX,
            };
            earliest = earliest.min(*e);
        }
        for j in 0..inst.num_jobs() {
            if est[j] != earliest {
                continue;
            }
            let op = s.ready_op(j).expect("job with a start time has a ready op");
            let value = match rule {
                Rule::Spt => inst.op(op).duration,
                Rule::Mwr => rem[op],
                Rule::Mor => (inst.job_len(j) - s.scheduled_in_job(j)) as Time,
            };
            let cand = (value, j);
            let pos = top.partition_point(|t| better(t, &cand) == Ordering::Less);
            if pos < TOP_K {
                top.insert(pos, cand);
                top.truncate(TOP_K);
            }
        }
        let pick = choose(top.len()).min(top.len() - 1);
        s.step(top[pick].1)?;
    }
    s.into_solution()
}

/// Greedy rule: always the best-ranked job, lowest index on ties.
pub fn pdr_solve(rule: Rule, inst: &Instance) -> Result<Solution> {
    construct(rule, inst, &remaining_work(inst), |_| 0)
}

/// Solution built with an explicit rank chooser, for tests of the
/// randomized rule.
pub fn pdr_with_chooser(
    rule: Rule,
    inst: &Instance,
    choose: impl FnMut(usize) -> usize,
) -> Result<Solution> {
    construct(rule, inst, &remaining_work(inst), choose)
}

/// `beta` randomized solutions; sample `i` uses stream `(seed, i)`, so the
/// first `k` samples are the same for every `beta >= k`.
pub fn pdr_samples(rule: Rule, inst: &Instance, beta: usize, seed: u64) -> Result<Vec<Solution>> {
    let rem = remaining_work(inst);
    (0..beta.max(1))
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            construct(rule, inst, &rem, |k| r.gen_range(0..k))
        })
        .collect()
}

/// Best of `beta` randomized solutions (earliest sample on ties).
pub fn pdr_randomized(rule: Rule, inst: &Instance, beta: usize, seed: u64) -> Result<Solution> {
    let mut samples = pdr_samples(rule, inst, beta, seed)?;
    let best = pseudo_label_index(&samples)?;
    Ok(samples.swap_remove(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_instance;
    use crate::schedule::validate_solution;
    use crate::testutil::two_by_two;

    #[test]
    fn spt_first_decision_on_small_example() {
        let inst = two_by_two();
        let sol = pdr_solve(Rule::Spt, &inst).unwrap();
        assert_eq!(sol.decisions[0], 1);
        let s = PartialSchedule::new(&inst);
        assert_eq!(pdr_priority(Rule::Spt, &s), vec![Some(3), Some(2)]);
    }

    #[test]
    fn priorities_track_remaining_work() {
        let inst = generate_instance(3, 4, 2).unwrap();
        let mut s = PartialSchedule::new(&inst);
        let before = pdr_priority(Rule::Mwr, &s);
        assert_eq!(pdr_priority(Rule::Mor, &s), vec![Some(4); 3]);
        let op = s.step(1).unwrap();
        let after = pdr_priority(Rule::Mwr, &s);
        assert_eq!(before[1].unwrap() - after[1].unwrap(), inst.op(op).duration);
        assert_eq!(pdr_priority(Rule::Mor, &s)[1], Some(3));
        for _ in 0..3 {
            s.step(1).unwrap();
        }
        assert_eq!(pdr_priority(Rule::Mor, &s)[1], None);
    }

    #[test]
    fn rank_one_chooser_equals_greedy() {
        for seed in 0..10 {
            let inst = generate_instance(6, 5, seed).unwrap();
            for rule in Rule::ALL {
                let greedy = pdr_solve(rule, &inst).unwrap();
                assert_eq!(pdr_with_chooser(rule, &inst, |_| 0).unwrap(), greedy);
                assert!(validate_solution(&inst, &greedy).is_ok());
            }
        }
    }

    #[test]
    fn randomized_is_deterministic_and_nested() {
        let inst = generate_instance(8, 6, 4).unwrap();
        let a = pdr_samples(Rule::Mor, &inst, 16, 12345).unwrap();
        let b = pdr_samples(Rule::Mor, &inst, 8, 12345).unwrap();
        assert_eq!(&a[..8], &b[..]);
        let best = pdr_randomized(Rule::Mor, &inst, 16, 12345).unwrap();
        assert_eq!(best.makespan, a.iter().map(|s| s.makespan).min().unwrap());
        for s in &a {
            assert!(validate_solution(&inst, s).is_ok());
        }
    }

    #[test]
    fn dispatching_is_non_delay() {
        let inst = generate_instance(7, 5, 3).unwrap();
        for rule in Rule::ALL {
            let sol = pdr_solve(rule, &inst).unwrap();
            let mut s = PartialSchedule::new(&inst);
            for &j in &sol.decisions {
                let earliest = (0..inst.num_jobs())
                    .filter_map(|k| {
                        let op = s.ready_op(k)?;
                        Some(s.job_ready()[k].max(s.machine_ready()[inst.op(op).machine]))
                    })
                    .min()
                    .unwrap();
                let op = s.step(j).unwrap();
                assert_eq!(s.start(op), Some(earliest));
            }
        }
    }

    #[test]
    fn rule_names_round_trip() {
        for rule in Rule::ALL {
            assert_eq!(rule.to_string().parse::<Rule>().unwrap(), rule);
        }
        assert!("lpt".parse::<Rule>().is_err());
    }
}
