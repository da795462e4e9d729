use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use slimjsp::bench::{self, Algorithm, BenchOptions, UbTable};
use slimjsp::io::{read_instance, write_instance, Format};
use slimjsp::model::{Checkpoint, DecodeMode};
use slimjsp::train::{train_loop, TrainConfig};
use slimjsp::{generate_instance, rng, validate_solution, Error, Result, Solution};

#[derive(Parser)]
#[command(
    name = "slimjsp",
    version,
    about = "Job-shop scheduling: learned and classic constructive solvers"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instances (durations 1..=99, random machine routes).
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "orlib")]
        format: Format,
    },
    /// Train a model with self-labeling.
    Train {
        /// Config file with `key = value` lines; unset keys take profile values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base settings when no config file is given: `desk` or `full`.
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve one instance and print its makespan.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "auto")]
        format: Format,
        /// Model checkpoint.
        #[arg(long, conflicts_with = "rule", required_unless_present = "rule")]
        model: Option<PathBuf>,
        /// Baseline: spt, mwr, mor, insa, or rspt/rmwr/rmor (randomized).
        #[arg(long)]
        rule: Option<String>,
        #[arg(long, default_value_t = 128)]
        beta: usize,
        #[arg(long, default_value = "sample")]
        mode: DecodeMode,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        /// Write the solution as JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run algorithms on a directory of instances.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        ub: PathBuf,
        /// Comma-separated ids: spt,mwr,mor,rspt,rmwr,rmor,insa,model:<ckpt>,model-greedy:<ckpt>.
        #[arg(long, value_delimiter = ',', required = true)]
        algos: Vec<String>,
        #[arg(long, default_value_t = 128)]
        beta: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-shape summary CSV (default: next to --out).
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        format: Format,
    },
    /// Check a solution file against an instance.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value = "auto")]
        format: Format,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen {
            n,
            m,
            count,
            seed,
            out,
            format,
        } => {
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for k in 0..count {
                let inst = generate_instance(n, m, rng::derive_seed(seed, k as u64))?;
                let path = out.join(format!("{}.txt", inst.name));
                write_instance(&inst, &path, format)?;
            }
            println!("wrote {count} instances to {}", out.display());
        }
        Command::Train {
            config,
            profile,
            checkpoint,
            seed,
        } => {
            let mut cfg = match config {
                Some(path) => TrainConfig::load(&path)?,
                None => TrainConfig::profile(&profile)?,
            };
            if let Some(c) = checkpoint {
                cfg.checkpoint = c;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let report = train_loop(&cfg)?;
            println!(
                "validation average {:.2} -> {:.2}; checkpoint {}, log {}",
                report.initial.overall,
                report.best.overall,
                report.checkpoint.display(),
                report.log.display()
            );
        }
        Command::Solve {
            instance,
            format,
            model,
            rule,
            beta,
            mode,
            seed,
            dump,
        } => {
            let inst = read_instance(&instance, format)?;
            let algo = match (model, rule) {
                (Some(path), _) => Algorithm::Model {
                    params: Checkpoint::load(&path)?.params.into(),
                    path,
                    mode,
                },
                (None, Some(r)) => {
                    let a: Algorithm = r.parse()?;
                    if matches!(a, Algorithm::Model { .. }) {
                        return Err(Error::Config("use --model for checkpoints".into()));
                    }
                    a
                }
                (None, None) => unreachable!("clap requires --model or --rule"),
            };
            let sol = algo.solve(&inst, beta, seed)?;
            println!("makespan {}", sol.makespan);
            if let Some(path) = dump {
                let text = serde_json::to_string_pretty(&sol)?;
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Bench {
            suite,
            ub,
            algos,
            beta,
            seed,
            out,
            summary,
            format,
        } => {
            let ub = UbTable::load(&ub)?;
            let algos = algos
                .iter()
                .map(|a| a.parse())
                .collect::<Result<Vec<Algorithm>>>()?;
            let (instances, failed) = bench::load_suite(&suite, format)?;
            for (p, e) in &failed {
                eprintln!("warning: could not read {}: {e}", p.display());
            }
            info!("{} instances, {} algorithms", instances.len(), algos.len());
            let opts = BenchOptions {
                beta,
                seed,
                workers: None,
            };
            let records = bench::run_benchmark(&algos, &instances, &ub, &opts)?;
            bench::write_records(&out, &records)?;
            let rows = bench::summarize(&records);
            let summary_path = summary.unwrap_or_else(|| {
                let stem = out.file_stem().unwrap_or_default().to_string_lossy();
                out.with_file_name(format!("{stem}_summary.csv"))
            });
            bench::write_summary(&summary_path, &rows)?;
            print!("{}", bench::format_summary(&rows));
        }
        Command::Validate {
            instance,
            solution,
            format,
        } => {
            let inst = read_instance(&instance, format)?;
            let text = std::fs::read_to_string(&solution).map_err(|e| Error::io(&solution, e))?;
            let sol: Solution = serde_json::from_str(&text)?;
            match validate_solution(&inst, &sol) {
                Ok(()) => println!("valid, makespan {}", sol.makespan),
                Err(violations) => {
                    for v in &violations {
                        eprintln!("{v}");
                    }
                    return Err(Error::InvalidInstance(format!(
                        "solution has {} violation(s)",
                        violations.len()
                    )));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
