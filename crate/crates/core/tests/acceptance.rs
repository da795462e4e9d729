//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers to run a subset, e.g.
//! `cargo test --release --test acceptance -- 1 4 9`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{data_dir, finite_difference_errors, random_params};
use slimjsp::baselines::{pdr_randomized, Rule};
use slimjsp::bench::{self, Algorithm, BenchOptions, UbTable};
use slimjsp::io::Format;
use slimjsp::model::{
    init_params, rollout, sequence_log_prob, sequence_log_prob_grad, Checkpoint, DecodeMode,
    ModelDims, ModelParams,
};
use slimjsp::oracle::{brute_force_optimum, enumerate_sequences};
use slimjsp::train::adam::AdamConfig;
use slimjsp::train::slim::{holdout_set, summarize, TrainReport};
use slimjsp::train::{
    select_pseudo_label, slim_loss, train_loop, validation_seed, Adam, Shape, TrainConfig,
};
use slimjsp::{generate_instance, rng, validate_solution, Instance, Result, Solution};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn taillard() -> (Vec<Instance>, UbTable) {
    let (instances, failed) =
        bench::load_suite(&data_dir().join("taillard"), Format::Taillard).unwrap();
    assert!(failed.is_empty(), "unreadable Taillard files: {failed:?}");
    assert_eq!(instances.len(), 80);
    (
        instances,
        UbTable::load(&data_dir().join("ub/taillard.csv")).unwrap(),
    )
}

/// Overall Avg PG per algorithm id, plus per-shape detail.
fn avg_pg(algos: &[Algorithm], beta: usize) -> (BTreeMap<String, f64>, String) {
    let (instances, ub) = taillard();
    let opts = BenchOptions {
        beta,
        seed: 12345,
        workers: None,
    };
    let records = bench::run_benchmark(algos, &instances, &ub, &opts).unwrap();
    assert_eq!(records.len(), 80 * algos.len());
    let rows = bench::summarize(&records);
    let avg = rows
        .iter()
        .filter(|r| r.shape == "Avg")
        .map(|r| (r.algo.clone(), r.mean_pg))
        .collect();
    (avg, bench::format_summary(&rows))
}

fn check_bands(avg: &BTreeMap<String, f64>, targets: &[(&str, f64)], tol: f64) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &(id, target) in targets {
        let got = avg[id];
        let ok = (got - target).abs() <= tol;
        pass &= ok;
        parts.push(format!(
            "{id} {got:.2} (target {target} +-{tol}{})",
            if ok { "" } else { ", OUT" }
        ));
    }
    (pass, parts.join("; "))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let algos: Vec<Algorithm> = Rule::ALL.iter().map(|&r| Algorithm::Greedy(r)).collect();
    let (avg, table) = avg_pg(&algos, 1);
    let secs = t.elapsed().as_secs_f64();
    println!("{table}");
    let (bands, detail) = check_bands(&avg, &[("spt", 27.4), ("mwr", 19.5), ("mor", 20.1)], 2.0);
    Outcome::new(
        bands && secs < 60.0,
        format!("{detail}; {secs:.1} s (limit 60 s)"),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let algos: Vec<Algorithm> = Rule::ALL
        .iter()
        .map(|&r| Algorithm::Randomized(r))
        .collect();
    let (avg, table) = avg_pg(&algos, 128);
    let secs = t.elapsed().as_secs_f64();
    println!("{table}");
    let (bands, detail) = check_bands(&avg, &[("rspt", 17.2), ("rmwr", 15.0), ("rmor", 14.5)], 2.5);
    Outcome::new(
        bands && secs < 600.0,
        format!("beta 128 seed 12345: {detail}; {secs:.1} s (limit 600 s)"),
    )
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let (avg, table) = avg_pg(&[Algorithm::Insa], 1);
    let secs = t.elapsed().as_secs_f64();
    println!("{table}");
    let (bands, detail) = check_bands(&avg, &[("insa", 18.0)], 3.5);
    Outcome::new(
        bands && secs < 600.0,
        format!("{detail}; {secs:.1} s (limit 600 s)"),
    )
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let zero = ModelParams::zeros(ModelDims::default());
    let mut invalid = 0;
    let mut oracle_mismatch = 0;
    let mut agree = BTreeMap::new();
    for (n, m) in [(2usize, 2usize), (3, 3)] {
        let mut hits = 0;
        for k in 0..50u64 {
            let inst = generate_instance(n, m, rng::derive_seed(4_000 + n as u64, k)).unwrap();
            let mut enumerated = u64::MAX;
            for d in enumerate_sequences(&inst, 12).unwrap() {
                let sol = Solution::from_decisions(&inst, &d).unwrap();
                invalid += usize::from(validate_solution(&inst, &sol).is_err());
                enumerated = enumerated.min(sol.makespan);
            }
            let (opt, best) = brute_force_optimum(&inst, 12).unwrap();
            invalid += usize::from(validate_solution(&inst, &best).is_err());
            oracle_mismatch += usize::from(opt != enumerated || best.makespan != opt);
            let samples = rollout(&zero, &inst, 256, DecodeMode::Sample, k).unwrap();
            invalid += samples
                .iter()
                .filter(|s| validate_solution(&inst, s).is_err())
                .count();
            let sampled = select_pseudo_label(&samples).unwrap().makespan;
            hits += usize::from(sampled == opt);
        }
        agree.insert(n, hits);
    }
    let secs = t.elapsed().as_secs_f64();
    let (h2, h3) = (agree[&2], agree[&3]);
    let pass = invalid == 0
        && oracle_mismatch == 0
        && h2 == 50
        && h3 as f64 >= 0.99 * 50.0
        && secs < 300.0;
    Outcome::new(
        pass,
        format!(
            "enumeration vs brute force mismatches {oracle_mismatch}; uniform-256 agreement 2x2 {h2}/50, 3x3 {h3}/50; \
             invalid solutions {invalid}; {secs:.1} s"
        ),
    )
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let inst = generate_instance(3, 3, 505).unwrap();
    let params = random_params(55, ModelDims::tiny());
    let samples = rollout(&params, &inst, 16, DecodeMode::Sample, 5).unwrap();
    let label = select_pseudo_label(&samples).unwrap();
    let (_, grad) = sequence_log_prob_grad(&params, &inst, &label.decisions).unwrap();
    let reports = finite_difference_errors(&params, &grad, &inst, label, 1e-5, 1);
    let worst = reports
        .iter()
        .max_by(|a, b| a.worst_rel.total_cmp(&b.worst_rel))
        .unwrap();
    let checked: usize = reports.iter().map(|r| r.checked).sum();
    let small_bad: usize = reports.iter().map(|r| r.small_mismatches).sum();
    // The output bias shifts every logit equally, so its gradient is exactly
    // zero and it has no entries above the threshold.
    let all_zero: Vec<&str> = reports
        .iter()
        .filter(|r| r.checked == 0)
        .map(|r| r.name.as_str())
        .collect();
    let total = params.num_scalars();
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        worst.worst_rel < 1e-4 && small_bad == 0 && reports.len() == params.tensors().len() && secs < 120.0,
        format!(
            "{} tensors, {total} entries; {checked} with |grad| > 1e-8, worst relative error {:.2e} ({}); \
             near-zero entries disagreeing {small_bad}; tensors with identically ~0 gradient {:?}; {secs:.1} s",
            reports.len(),
            worst.worst_rel,
            worst.name,
            all_zero
        ),
    )
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let shapes = [(1, 6), (6, 1), (2, 2), (2, 3), (3, 2)];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for k in 0..20u64 {
        let (n, m) = shapes[k as usize % shapes.len()];
        let inst = generate_instance(n, m, 600 + k).unwrap();
        let params = random_params(k, ModelDims::default());
        let total: f64 = enumerate_sequences(&inst, 12)
            .unwrap()
            .iter()
            .map(|d| {
                sequence_log_prob(&params, &inst, d)
                    .unwrap()
                    .iter()
                    .sum::<f64>()
                    .exp()
            })
            .sum();
        worst = worst.max((total - 1.0).abs());
        count += 1;
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-6 && secs < 60.0,
        format!("{count} instances, max |sum - 1| = {worst:.2e}; {secs:.1} s"),
    )
}

fn smoke_config(dir: &Path) -> TrainConfig {
    TrainConfig {
        shapes: vec![Shape::new(6, 6)],
        instances_per_shape: 2000,
        epochs: 1,
        beta_train: 64,
        batch_accum: 16,
        lr: 2e-4,
        holdout_per_shape: 100,
        beta_valid: 64,
        validate_every: 25,
        seed: 0,
        checkpoint: dir.join("smoke.ckpt"),
        ..TrainConfig::desk()
    }
}

fn criterion_7(cfg: &TrainConfig, report: &TrainReport, secs: f64) -> Outcome {
    let initial = report.initial.overall;
    let (_, last) = report.history.last().expect("at least one validation");
    let final_avg = last.overall;
    let holdout = holdout_set(cfg).unwrap();
    let seed = validation_seed(cfg);
    let spt: Vec<u64> = holdout
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            pdr_randomized(
                Rule::Spt,
                inst,
                cfg.beta_valid,
                rng::derive_seed(seed, i as u64),
            )
            .unwrap()
            .makespan
        })
        .collect();
    let spt_avg = summarize(&holdout, &spt).unwrap().overall;
    let drop = 100.0 * (1.0 - final_avg / initial);
    let trend: Vec<String> = report
        .history
        .iter()
        .map(|(s, v)| format!("{s}:{:.1}", v.overall))
        .collect();
    Outcome::new(
        drop >= 5.0 && final_avg < spt_avg && secs <= 1800.0,
        format!(
            "hold-out avg {initial:.2} -> {final_avg:.2} ({drop:.1}% lower, need >= 5%); randomized SPT {spt_avg:.2}; \
             validations [{}]; {secs:.0} s",
            trend.join(" ")
        ),
    )
}

fn criterion_8(report: &TrainReport) -> Outcome {
    // Dominance on every training step.
    let mut violations = 0;
    let mut checked = 0;
    for step in &report.steps {
        for s in &step.instances {
            checked += 1;
            let min = *s.sample_makespans.iter().min().unwrap();
            let first_min = s.sample_makespans.iter().position(|&c| c == min).unwrap();
            violations += usize::from(s.best_makespan != min || s.label_index != first_min);
        }
    }

    let inst = Instance::new("2x2", 2, vec![vec![(0, 3), (1, 2)], vec![(1, 2), (0, 4)]]).unwrap();
    let zero = ModelParams::zeros(ModelDims::default());
    let loss = slim_loss(&sequence_log_prob(&zero, &inst, &[0, 0, 1, 1]).unwrap()).unwrap();
    let loss_err = (loss - std::f64::consts::LN_2 / 2.0).abs();

    let mut wins = 0;
    for trial in 0..20u64 {
        let inst = generate_instance(5, 4, 800 + trial).unwrap();
        let params = random_params(trial, ModelDims::default());
        let samples = rollout(&params, &inst, 32, DecodeMode::Sample, trial).unwrap();
        let label = select_pseudo_label(&samples).unwrap();
        let (lp, mut grad) = sequence_log_prob_grad(&params, &inst, &label.decisions).unwrap();
        let before = slim_loss(&lp).unwrap();
        for t in grad.tensors_mut() {
            t.scale(-1.0);
        }
        let mut p = params.clone();
        let mut adam = Adam::new(
            AdamConfig {
                lr: 1e-4,
                ..AdamConfig::default()
            },
            p.num_scalars(),
        );
        adam.update_params(&mut p, &grad).unwrap();
        let after = slim_loss(&sequence_log_prob(&p, &inst, &label.decisions).unwrap()).unwrap();
        wins += usize::from(after < before);
    }
    Outcome::new(
        violations == 0 && checked > 0 && loss_err <= 1e-9 && wins >= 18,
        format!(
            "dominance violations {violations}/{checked} (instance, step) pairs; uniform 2x2 loss error {loss_err:.1e}; \
             Adam descent {wins}/20"
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<String> {
    let out = Command::new(env!("CARGO_BIN_EXE_slimjsp"))
        .args(args)
        .output()
        .map_err(|e| slimjsp::Error::io("slimjsp", e))?;
    if !out.status.success() {
        return Err(slimjsp::Error::Config(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn makespans(path: &Path) -> Vec<(String, String, u64)> {
    bench::read_records(path)
        .unwrap()
        .into_iter()
        .map(|r| (r.algo, r.instance, r.makespan))
        .collect()
}

fn criterion_9(dir: &Path) -> Outcome {
    let t = Instant::now();
    let suite = dir.join("suite9");
    fs::create_dir_all(&suite).unwrap();
    for name in ["ta01", "ta02", "ta11"] {
        fs::copy(
            data_dir().join(format!("taillard/{name}.txt")),
            suite.join(format!("{name}.txt")),
        )
        .unwrap();
    }
    let ckpt = dir.join("fixed9.ckpt");
    Checkpoint::new(init_params(9, ModelDims::default()))
        .save(&ckpt)
        .unwrap();
    let ub = data_dir().join("ub/taillard.csv");
    let algos = format!(
        "rspt,rmwr,insa,model:{},model-greedy:{}",
        ckpt.display(),
        ckpt.display()
    );
    let p = |x: &Path| x.to_str().unwrap().to_string();

    let mut bench_runs = Vec::new();
    let mut solve_runs = Vec::new();
    for (k, workers) in ["1", "4", "1", "4"].iter().enumerate() {
        let out = dir.join(format!("bench9_{k}.csv"));
        let r = run_cli(&[
            "--workers",
            workers,
            "bench",
            "--suite",
            &p(&suite),
            "--ub",
            &p(&ub),
            "--algos",
            &algos,
            "--beta",
            "8",
            "--seed",
            "7",
            "--out",
            &p(&out),
        ]);
        if let Err(e) = r {
            return Outcome::new(false, format!("bench failed: {e}"));
        }
        bench_runs.push(makespans(&out));
        let s = run_cli(&[
            "--workers",
            workers,
            "solve",
            &p(&suite.join("ta01.txt")),
            "--model",
            &p(&ckpt),
            "--beta",
            "16",
            "--seed",
            "3",
        ]);
        match s {
            Ok(s) => solve_runs.push(s),
            Err(e) => return Outcome::new(false, format!("solve failed: {e}")),
        }
    }
    let bench_same = bench_runs.windows(2).all(|w| w[0] == w[1]);
    let solve_same = solve_runs.windows(2).all(|w| w[0] == w[1]);
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        bench_same && solve_same && !bench_runs[0].is_empty(),
        format!(
            "bench {} records identical across 2 runs x workers {{1,4}}: {bench_same}; solve --model {}identical: \
             {solve_same}; {secs:.1} s",
            bench_runs[0].len(),
            solve_runs[0].trim().to_string() + ", "
        ),
    )
}

fn criterion_10(dir: &Path) -> Outcome {
    let t = Instant::now();
    let ckpt = dir.join("fixed10.ckpt");
    Checkpoint::new(init_params(10, ModelDims::default()))
        .save(&ckpt)
        .unwrap();
    let params = Checkpoint::load(&ckpt).unwrap().params;
    let (instances, _) = taillard();
    let mut monotone_fail = Vec::new();
    let mut nested_fail = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let four = rollout(&params, inst, 4, DecodeMode::Sample, 12345).unwrap();
        let mut best = u64::MAX;
        let mut prev = u64::MAX;
        for s in &four {
            best = best.min(s.makespan);
            if best > prev {
                monotone_fail.push(inst.name.clone());
            }
            prev = best;
        }
        if i < 10 {
            let two = rollout(&params, inst, 2, DecodeMode::Sample, 12345).unwrap();
            if two[..] != four[..2] {
                nested_fail.push(inst.name.clone());
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        monotone_fail.is_empty() && nested_fail.is_empty(),
        format!(
            "prefix minima non-increasing on {}/80 instances (beta 4); beta 2 samples equal beta 4 prefix on {}/10; {secs:.0} s",
            80 - monotone_fail.len(),
            10 - nested_fail.len()
        ),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wants = |k: u32| selected.is_empty() || selected.contains(&k);
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |k: u32, o: Outcome| {
        println!(
            "criterion {k}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((k, o));
    };

    let plain: [(u32, fn() -> Outcome); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
    ];
    for (k, f) in plain {
        if wants(k) {
            report(k, f());
        }
    }
    if wants(7) || wants(8) {
        let cfg = smoke_config(dir.path());
        let t = Instant::now();
        let run = train_loop(&cfg);
        let secs = t.elapsed().as_secs_f64();
        match run {
            Ok(r) => {
                if wants(7) {
                    report(7, criterion_7(&cfg, &r, secs));
                }
                if wants(8) {
                    report(8, criterion_8(&r));
                }
            }
            Err(e) => {
                for k in [7, 8].into_iter().filter(|&k| wants(k)) {
                    report(k, Outcome::new(false, format!("training failed: {e}")));
                }
            }
        }
    }
    if wants(9) {
        report(9, criterion_9(dir.path()));
    }
    if wants(10) {
        report(10, criterion_10(dir.path()));
    }

    println!();
    for (k, o) in &results {
        println!("criterion {k:>2}: {}", if o.pass { "PASS" } else { "FAIL" });
    }
    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!(
        "acceptance: {}/{} passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
