//! Benchmark runner: solve a suite with several algorithms and report
//! percentage gaps against known upper bounds.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{insa, pdr_randomized, pdr_solve, Rule};
use crate::error::{Error, Result};
use crate::instance::{Instance, Time};
use crate::io::{read_instance, Format};
use crate::model::{rollout, Checkpoint, DecodeMode, ModelParams};
use crate::schedule::Solution;
use crate::train::pseudo_label_index;

/// Percentage gap `100 * (c_alg / c_ub - 1)`. Negative when the algorithm
/// beats the bound.
pub fn pg(c_alg: Time, c_ub: Time) -> Result<f64> {
    if c_ub == 0 {
        return Err(Error::Config("upper bound must be positive".into()));
    }
    Ok(100.0 * (c_alg as f64 / c_ub as f64 - 1.0))
}

/// Best known makespans by instance name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UbTable(BTreeMap<String, Time>);

#[derive(Deserialize)]
struct UbRow {
    name: String,
    ub: Time,
}

impl UbTable {
    pub fn from_reader(r: impl std::io::Read) -> Result<Self> {
        let mut map = BTreeMap::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let UbRow { name, ub } = row?;
            if ub == 0 {
                return Err(Error::Config(format!(
                    "upper bound of {name} must be positive"
                )));
            }
            if map.insert(name.clone(), ub).is_some() {
                return Err(Error::Config(format!("duplicate upper bound for {name}")));
            }
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn get(&self, name: &str) -> Option<Time> {
        self.0.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, ub: Time) {
        self.0.insert(name.into(), ub);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum Algorithm {
    Greedy(Rule),
    Randomized(Rule),
    Insa,
    Model {
        path: PathBuf,
        mode: DecodeMode,
        params: Arc<ModelParams>,
    },
}

impl Algorithm {
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Algorithm::Randomized(_)
                | Algorithm::Model {
                    mode: DecodeMode::Sample,
                    ..
                }
        )
    }

    /// Best solution for `inst`. `beta` and `seed` only affect stochastic
    /// algorithms.
    pub fn solve(&self, inst: &Instance, beta: usize, seed: u64) -> Result<Solution> {
        match self {
            Algorithm::Greedy(rule) => pdr_solve(*rule, inst),
            Algorithm::Randomized(rule) => pdr_randomized(*rule, inst, beta, seed),
            Algorithm::Insa => insa(inst),
            Algorithm::Model { mode, params, .. } => {
                let mut sols = rollout(params, inst, beta, *mode, seed)?;
                let best = pseudo_label_index(&sols)?;
                Ok(sols.swap_remove(best))
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Greedy(r) => write!(f, "{r}"),
            Algorithm::Randomized(r) => write!(f, "r{r}"),
            Algorithm::Insa => f.write_str("insa"),
            Algorithm::Model { path, mode, .. } => {
                let tag = match mode {
                    DecodeMode::Sample => "model",
                    DecodeMode::Greedy => "model-greedy",
                };
                write!(f, "{tag}:{}", path.display())
            }
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// `spt|mwr|mor` (greedy), `rspt|rmwr|rmor` (randomized top-3), `insa`,
    /// `model:<checkpoint>` (sampling) or `model-greedy:<checkpoint>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((tag, path)) = s.split_once(':') {
            let mode = match tag {
                "model" => DecodeMode::Sample,
                "model-greedy" => DecodeMode::Greedy,
                _ => return Err(Error::Config(format!("unknown algorithm '{s}'"))),
            };
            let path = PathBuf::from(path);
            let params = Arc::new(Checkpoint::load(&path)?.params);
            return Ok(Algorithm::Model { path, mode, params });
        }
        if s == "insa" {
            return Ok(Algorithm::Insa);
        }
        if let Ok(rule) = s.parse::<Rule>() {
            return Ok(Algorithm::Greedy(rule));
        }
        if let Some(rule) = s.strip_prefix('r').and_then(|r| r.parse::<Rule>().ok()) {
            return Ok(Algorithm::Randomized(rule));
        }
        Err(Error::Config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    /// `"NxM"`.
    pub shape: String,
    pub algo: String,
    pub beta: usize,
    pub seed: u64,
    pub makespan: Time,
    pub pg: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub beta: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            beta: 128,
            seed: 12345,
            workers: None,
        }
    }
}

/// Instances found in `dir`, sorted by file name, plus the files that could
/// not be read.
pub fn load_suite(dir: &Path, format: Format) -> Result<(Vec<Instance>, Vec<(PathBuf, Error)>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut instances = Vec::new();
    let mut failed = Vec::new();
    for p in paths {
        match read_instance(&p, format) {
            Ok(inst) => instances.push(inst),
            Err(e) => {
                warn!("skipping {}: {e}", p.display());
                failed.push((p, e));
            }
        }
    }
    Ok((instances, failed))
}

fn shape_label(inst: &Instance) -> String {
    let (n, m) = inst.shape();
    format!("{n}x{m}")
}

/// Runs every algorithm on every instance that has an upper bound. Records
/// are sorted by (algorithm, instance name), so the output does not depend
/// on scheduling.
pub fn run_benchmark(
    algos: &[Algorithm],
    instances: &[Instance],
    ub: &UbTable,
    opts: &BenchOptions,
) -> Result<Vec<BenchRecord>> {
    let jobs: Vec<(&Algorithm, &Instance, Time)> = algos
        .iter()
        .flat_map(|a| instances.iter().map(move |i| (a, i)))
        .filter_map(|(a, inst)| match ub.get(&inst.name) {
            Some(c) => Some((a, inst, c)),
            None => {
                warn!("no upper bound for {}; skipped", inst.name);
                None
            }
        })
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(algo, inst, c_ub)| {
                let clock = Instant::now();
                let sol = algo.solve(inst, opts.beta, opts.seed)?;
                let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
                Ok(BenchRecord {
                    instance: inst.name.clone(),
                    shape: shape_label(inst),
                    algo: algo.to_string(),
                    beta: if algo.is_stochastic() { opts.beta } else { 1 },
                    seed: opts.seed,
                    makespan: sol.makespan,
                    pg: pg(sol.makespan, c_ub)?,
                    wall_ms,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    let mut records = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    records.sort_by(|a, b| (&a.algo, &a.instance).cmp(&(&b.algo, &b.instance)));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    /// `"NxM"`, or `"Avg"` for the mean over all instances.
    pub shape: String,
    pub count: usize,
    pub mean_pg: f64,
    pub mean_wall_ms: f64,
}

fn parse_shape(s: &str) -> (usize, usize) {
    s.split_once('x')
        .and_then(|(n, m)| Some((n.parse().ok()?, m.parse().ok()?)))
        .unwrap_or((usize::MAX, usize::MAX))
}

/// Per-shape means for each algorithm, followed by an overall `Avg` row.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut by_algo: BTreeMap<&str, BTreeMap<(usize, usize), Vec<&BenchRecord>>> = BTreeMap::new();
    for r in records {
        by_algo
            .entry(&r.algo)
            .or_default()
            .entry(parse_shape(&r.shape))
            .or_default()
            .push(r);
    }
    let row = |algo: &str, shape: String, rs: &[&BenchRecord]| SummaryRow {
        algo: algo.to_string(),
        shape,
        count: rs.len(),
        mean_pg: rs.iter().map(|r| r.pg).sum::<f64>() / rs.len() as f64,
        mean_wall_ms: rs.iter().map(|r| r.wall_ms).sum::<f64>() / rs.len() as f64,
    };
    let mut out = Vec::new();
    for (algo, shapes) in by_algo {
        let mut all = Vec::new();
        for rs in shapes.values() {
            out.push(row(algo, rs[0].shape.clone(), rs));
            all.extend(rs.iter().copied());
        }
        out.push(row(algo, "Avg".into(), &all));
    }
    out
}

pub fn write_records(path: &Path, records: &[BenchRecord]) -> Result<()> {
    write_csv(path, records)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(path, rows)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Human-readable table: one row per shape, one PG column per algorithm.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut algos: Vec<&str> = Vec::new();
    let mut shapes: Vec<&str> = Vec::new();
    for r in rows {
        if !algos.contains(&r.algo.as_str()) {
            algos.push(&r.algo);
        }
        if !shapes.contains(&r.shape.as_str()) {
            shapes.push(&r.shape);
        }
    }
    shapes.sort_by_key(|s| (*s == "Avg", parse_shape(s)));
    let width = algos.iter().map(|a| a.len()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<8}", "shape");
    for a in &algos {
        let _ = write!(out, " {a:>width$}");
    }
    out.push('\n');
    for s in shapes {
        let _ = write!(out, "{s:<8}");
        for a in &algos {
            match rows.iter().find(|r| r.algo == *a && r.shape == s) {
                Some(r) => {
                    let _ = write!(out, " {:>width$.2}", r.mean_pg);
                }
                None => {
                    let _ = write!(out, " {:>width$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
