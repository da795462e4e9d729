//! Job-shop instances and their disjunctive graph.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Integer time unit used for durations, start and completion times.
pub type Time = u64;

/// Largest duration emitted by the Taillard-style generator.
pub const MAX_GENERATED_DURATION: Time = 99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Operation {
    pub machine: usize,
    pub duration: Time,
}

/// A job-shop instance with operations indexed globally and contiguously by
/// job: the operations of job `j` are `job_start[j] .. job_start[j] + job_len[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    num_machines: usize,
    ops: Vec<Operation>,
    job_start: Vec<usize>,
    job_len: Vec<usize>,
    job_of: Vec<usize>,
}

impl Instance {
    /// Builds an instance from per-job `(machine, duration)` sequences.
    pub fn new(
        name: impl Into<String>,
        num_machines: usize,
        jobs: Vec<Vec<(usize, Time)>>,
    ) -> Result<Self> {
        if jobs.is_empty() {
            return Err(Error::InvalidInstance("no jobs".into()));
        }
        if num_machines == 0 {
            return Err(Error::InvalidInstance("no machines".into()));
        }
        let mut ops = Vec::new();
        let mut job_start = Vec::with_capacity(jobs.len());
        let mut job_len = Vec::with_capacity(jobs.len());
        let mut job_of = Vec::new();
        for (j, job) in jobs.into_iter().enumerate() {
            job_start.push(ops.len());
            job_len.push(job.len());
            for (machine, duration) in job {
                if machine >= num_machines {
                    return Err(Error::InvalidInstance(format!(
                        "job {j} uses machine {machine} but the instance has {num_machines}"
                    )));
                }
                ops.push(Operation { machine, duration });
                job_of.push(j);
            }
        }
        Ok(Self {
            name: name.into(),
            num_machines,
            ops,
            job_start,
            job_len,
            job_of,
        })
    }

    pub fn num_jobs(&self) -> usize {
        self.job_start.len()
    }

    pub fn num_machines(&self) -> usize {
        self.num_machines
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    /// `(jobs, machines)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.num_jobs(), self.num_machines)
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn op(&self, i: usize) -> Operation {
        self.ops[i]
    }

    pub fn job_start(&self, job: usize) -> usize {
        self.job_start[job]
    }

    pub fn job_len(&self, job: usize) -> usize {
        self.job_len[job]
    }

    pub fn job_of(&self, op: usize) -> usize {
        self.job_of[op]
    }

    /// Global operation indices of `job`, in processing order.
    pub fn job_ops(&self, job: usize) -> std::ops::Range<usize> {
        self.job_start[job]..self.job_start[job] + self.job_len[job]
    }

    pub fn job_total_duration(&self, job: usize) -> Time {
        self.job_ops(job).map(|i| self.ops[i].duration).sum()
    }

    /// Operations processed on `machine`, in increasing index order.
    pub fn machine_ops(&self, machine: usize) -> Vec<usize> {
        (0..self.ops.len())
            .filter(|&i| self.ops[i].machine == machine)
            .collect()
    }

    /// True when every job visits every machine exactly once.
    pub fn is_rectangular(&self) -> bool {
        let m = self.num_machines;
        (0..self.num_jobs()).all(|j| {
            if self.job_len[j] != m {
                return false;
            }
            let mut seen = vec![false; m];
            self.job_ops(j)
                .all(|i| !std::mem::replace(&mut seen[self.ops[i].machine], true))
        })
    }

    /// Per-job `(machine, duration)` lists.
    pub fn jobs(&self) -> Vec<Vec<(usize, Time)>> {
        (0..self.num_jobs())
            .map(|j| {
                self.job_ops(j)
                    .map(|i| (self.ops[i].machine, self.ops[i].duration))
                    .collect()
            })
            .collect()
    }

    pub fn disjunctive_graph(&self) -> DisjunctiveGraph {
        DisjunctiveGraph::new(self)
    }
}

/// Generates a Taillard-style random instance: every job visits each machine
/// once in a uniformly random order, durations are uniform on `[1, 99]`.
pub fn generate_instance(num_jobs: usize, num_machines: usize, seed: u64) -> Result<Instance> {
    if num_jobs == 0 || num_machines == 0 {
        return Err(Error::InvalidInstance(format!(
            "shape {num_jobs}x{num_machines} must be positive"
        )));
    }
    let mut rng = rng::stream(seed, ((num_jobs as u64) << 32) | num_machines as u64);
    let durations: Vec<Vec<Time>> = (0..num_jobs)
        .map(|_| {
            (0..num_machines)
                .map(|_| rng.gen_range(1..=MAX_GENERATED_DURATION))
                .collect()
        })
        .collect();
    let jobs = durations
        .into_iter()
        .map(|durs| {
            let mut order: Vec<usize> = (0..num_machines).collect();
            order.shuffle(&mut rng);
            order.into_iter().zip(durs).collect()
        })
        .collect();
    Instance::new(
        format!("rand_{num_jobs}x{num_machines}_{seed}"),
        num_machines,
        jobs,
    )
}

/// Disjunctive graph `G = (V, A, E)`: conjunctive arcs between consecutive
/// operations of a job, disjunctive edges between operations sharing a machine.
#[derive(Debug, Clone)]
pub struct DisjunctiveGraph {
    pub num_vertices: usize,
    pub conj_arcs: Vec<(usize, usize)>,
    pub disj_edges: Vec<(usize, usize)>,
    /// Operation indices per machine (the disjunctive cliques).
    pub cliques: Vec<Vec<usize>>,
}

impl DisjunctiveGraph {
    pub fn new(inst: &Instance) -> Self {
        let conj_arcs = (0..inst.num_jobs())
            .flat_map(|j| inst.job_ops(j).zip(inst.job_ops(j).skip(1)))
            .collect();
        let cliques: Vec<Vec<usize>> = (0..inst.num_machines())
            .map(|mc| inst.machine_ops(mc))
            .collect();
        let mut disj_edges = Vec::new();
        for clique in &cliques {
            for (a, &i) in clique.iter().enumerate() {
                for &k in &clique[a + 1..] {
                    disj_edges.push((i, k));
                }
            }
        }
        Self {
            num_vertices: inst.num_ops(),
            conj_arcs,
            disj_edges,
            cliques,
        }
    }

    /// Undirected neighborhood of every vertex including the vertex itself:
    /// conjunctive arcs in both directions plus the whole machine clique.
    /// Each list is sorted and free of duplicates.
    pub fn neighborhoods(&self) -> Vec<Vec<usize>> {
        let mut nb: Vec<Vec<usize>> = (0..self.num_vertices).map(|i| vec![i]).collect();
        for &(a, b) in &self.conj_arcs {
            nb[a].push(b);
            nb[b].push(a);
        }
        for clique in &self.cliques {
            for &i in clique {
                nb[i].extend(clique.iter().copied().filter(|&k| k != i));
            }
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }
}
