//! The `kanae` command line: `train`, `bench`, `gradcheck`, `inspect`.
//!
//! Exit codes: 0 success, 1 run failure, 2 configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use toml::Value;

use crate::config::{resolve, split_key_flags, Flat, RunConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};
use crate::nn::checkpoint;
use crate::suite::{gradcheck_suite, SuiteOptions};
use crate::tasks::efficiency::{efficiency_table, markdown_summary, summarize, write_table_csv, write_table_json};
use crate::tasks::{self, run_dir, Task, TaskReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "kanae",
    version,
    about = "Kolmogorov-Arnold autoencoder benchmark",
    after_help = "Any config key can be given as a flag: --section.key=value (e.g. --train.epochs=50)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate one (task, family, seed) run.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Same as --train.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Same as --output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every family for each configured task and seed.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Same as --output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite existing run directories.
        #[arg(long)]
        force: bool,
        /// Runs executed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Finite-difference check of every layer type and the default models.
    Gradcheck {
        /// Check scaled-down models instead of the default architectures.
        #[arg(long)]
        small: bool,
        /// Test hook: perturb one analytic gradient per check.
        #[arg(long)]
        corrupt_gradient: bool,
        /// Print the full reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the metadata header of a checkpoint.
    Inspect { checkpoint: PathBuf },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_RUN,
    }
}

fn report_error(e: &Error) -> i32 {
    let code = exit_code(e);
    if code == EXIT_CONFIG {
        eprintln!("configuration error:");
        for line in e.to_string().trim_start_matches("configuration error: ").lines() {
            eprintln!("  {line}");
        }
    } else {
        eprintln!("error: {e}");
    }
    code
}

/// Run the command line `args` (program name first) and return the exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let (rest, mut flags) = split_key_flags(&args);
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Train { config, seed, out } => {
            if let Some(s) = seed {
                flags.insert("train.seed".into(), Value::Integer(s as i64));
            }
            if let Some(o) = out {
                flags.insert("output.dir".into(), Value::String(o.to_string_lossy().into()));
            }
            cmd_train(config.as_deref(), &flags)
        }
        Command::Bench { config, out, force, jobs } => {
            if let Some(o) = out {
                flags.insert("output.dir".into(), Value::String(o.to_string_lossy().into()));
            }
            cmd_bench(config.as_deref(), &flags, force, jobs.max(1))
        }
        Command::Gradcheck {
            small,
            corrupt_gradient,
            json,
        } => cmd_gradcheck(
            SuiteOptions {
                corrupt_analytic: corrupt_gradient,
                small_models: small,
            },
            json,
        ),
        Command::Inspect { checkpoint } => cmd_inspect(&checkpoint),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

fn problems_to_error(p: Vec<String>) -> Result<()> {
    if p.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(p.join("\n")))
    }
}

/// Resolve and fully validate a configuration for a training run.
fn resolve_for_run(file: Option<&Path>, flags: &Flat) -> Result<RunConfig> {
    let cfg = resolve(file, flags)?;
    let mut p = cfg.data_problems();
    if let Err(Error::Config(msg)) = tasks::validate(cfg.task, &cfg.model, &cfg.train, &cfg.settings) {
        p.extend(msg.split("; ").map(str::to_string));
    }
    problems_to_error(p)?;
    Ok(cfg)
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let train = cfg.train_path.as_deref().expect("validated");
    let test = cfg.test_path.as_deref().expect("validated");
    let data = Dataset::load(train, test)?;
    if data.observed_length != cfg.model.input_length {
        eprintln!(
            "note: series length in the data is {}, configured model.input_length is {}; using {}",
            data.observed_length, cfg.model.input_length, data.observed_length
        );
    }
    Ok(data)
}

fn run_one(cfg: &RunConfig, data: &Dataset) -> Result<(PathBuf, TaskReport)> {
    let mut outcome = tasks::run(cfg.task, &cfg.model, &cfg.train, &cfg.settings, data)?;
    outcome.report.config = cfg.to_json();
    let dir = run_dir(&cfg.output_dir, cfg.task, cfg.model.family, cfg.train.seed);
    tasks::write_artifacts(&dir, &outcome)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok((dir, outcome.report))
}

fn cmd_train(file: Option<&Path>, flags: &Flat) -> Result<i32> {
    let cfg = resolve_for_run(file, flags)?;
    let data = load_data(&cfg)?;
    let (dir, r) = run_one(&cfg, &data)?;
    println!(
        "{} {} seed {}: params {}, train MSE {:.6}, test MSE {:.6}, {:.3} s/epoch",
        r.task, r.family, r.seed, r.param_count, r.train_mse, r.test_mse, r.mean_epoch_seconds
    );
    if let Some(a) = &r.anomaly {
        println!("AUC {:.4}, threshold {:.6}", a.auc, a.threshold);
    }
    println!("wrote {}", dir.display());
    Ok(EXIT_OK)
}

/// The configuration of one bench run: family defaults plus the shared
/// model settings of `base`; generation runs get a variational head.
pub fn bench_run_config(base: &RunConfig, task: Task, family: Family, seed: u64) -> RunConfig {
    let m = &base.model;
    let model = ModelSpec {
        input_length: m.input_length,
        latent_dim: m.latent_dim,
        kernel: m.kernel,
        stride: m.stride,
        grid: m.grid,
        batchnorm: m.batchnorm,
        dropout: m.dropout,
        smoothness: m.smoothness,
        variational: m.variational || task == Task::Generation,
        ..ModelSpec::new(family)
    };
    let mut cfg = base.clone();
    cfg.model = model;
    cfg.task = task;
    cfg.train.seed = seed;
    cfg
}

fn cmd_bench(file: Option<&Path>, flags: &Flat, force: bool, jobs: usize) -> Result<i32> {
    let base = resolve(file, flags)?;
    let mut runs = Vec::new();
    let mut p = base.data_problems();
    for &task in &base.tasks {
        for &family in &base.families {
            for &seed in &base.seeds {
                let cfg = bench_run_config(&base, task, family, seed);
                if let Err(Error::Config(msg)) = tasks::validate(task, &cfg.model, &cfg.train, &cfg.settings) {
                    p.push(format!("{task}/{family}: {msg}"));
                }
                runs.push(cfg);
            }
        }
    }
    p.dedup();
    problems_to_error(p)?;
    if !force {
        let existing: Vec<String> = runs
            .iter()
            .map(|c| run_dir(&c.output_dir, c.task, c.model.family, c.train.seed))
            .filter(|d| d.exists())
            .map(|d| d.display().to_string())
            .collect();
        if !existing.is_empty() {
            return Err(Error::Config(format!(
                "refusing to overwrite {} existing run directories (first: {}); pass --force",
                existing.len(),
                existing[0]
            )));
        }
    }
    let data = load_data(&base)?;

    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<std::result::Result<TaskReport, String>>>> =
        runs.iter().map(|_| Mutex::new(None)).collect();
    let total = runs.len();
    std::thread::scope(|s| {
        for _ in 0..jobs.min(total) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = runs.get(i) else { break };
                let label = format!("{}/{}/seed{:02}", cfg.task, cfg.model.family.tag(), cfg.train.seed);
                let res = run_one(cfg, &data).map(|(_, r)| r).map_err(|e| e.to_string());
                match &res {
                    Ok(r) => eprintln!("[{}/{total}] {label}: test MSE {:.6}", i + 1, r.test_mse),
                    Err(e) => eprintln!("[{}/{total}] {label}: FAILED: {e}", i + 1),
                }
                *results[i].lock().expect("no poisoned runs") = Some(res);
            });
        }
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (cfg, slot) in runs.iter().zip(results) {
        match slot.into_inner().expect("no poisoned runs") {
            Some(Ok(r)) => reports.push(r),
            Some(Err(e)) => failures.push(serde_json::json!({
                "task": cfg.task,
                "family": cfg.model.family,
                "seed": cfg.train.seed,
                "error": e,
            })),
            None => unreachable!("every run is claimed"),
        }
    }
    let out = &base.output_dir;
    std::fs::create_dir_all(out)?;
    let table = efficiency_table(&reports);
    write_table_csv(&out.join("efficiency.csv"), &table)?;
    write_table_json(&out.join("efficiency.json"), &table)?;
    let mut md = String::from("# Benchmark summary\n\n");
    md.push_str(&markdown_summary(&summarize(&table)));
    if !failures.is_empty() {
        md.push_str(&format!("\n{} run(s) failed; see failures.json\n", failures.len()));
    }
    std::fs::write(out.join("summary.md"), &md)?;
    std::fs::write(out.join("failures.json"), serde_json::to_string_pretty(&failures)?)?;
    print!("{md}");
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_RUN })
}

fn cmd_gradcheck(opts: SuiteOptions, json: bool) -> Result<i32> {
    let entries = gradcheck_suite(opts)?;
    let mut stdout = std::io::stdout().lock();
    if json {
        writeln!(stdout, "{}", serde_json::to_string_pretty(&entries)?)?;
    } else {
        writeln!(stdout, "{:<18} {:>8} {:>12} {:>9}  result", "layer", "checked", "worst rel", "tol")?;
        for e in &entries {
            let r = &e.report;
            writeln!(
                stdout,
                "{:<18} {:>8} {:>12.3e} {:>9.0e}  {}",
                e.layer_type,
                r.checked,
                r.max_rel_error,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" }
            )?;
        }
    }
    Ok(if entries.iter().all(|e| e.report.passed) { EXIT_OK } else { EXIT_RUN })
}

fn cmd_inspect(path: &Path) -> Result<i32> {
    let meta = checkpoint::read_metadata(path)?;
    println!("{}", serde_json::to_string_pretty(&meta)?);
    Ok(EXIT_OK)
}
