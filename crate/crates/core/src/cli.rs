//! Command-line runner.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure, 4 a property check failed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checks::run_suite;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::eval::evaluate_1d;
use crate::groups::GroupSampler;
use crate::net::Denoiser;
use crate::point::Point;
use crate::sampler::{ancestral_sample, Method, SampleRun};
use crate::train::{equivariance_error, gradient_variance_sweep, train_loop};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "orbitgrad",
    version,
    about = "Orbit-averaged denoiser training and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML experiment config; defaults describe the 1D reflection toy.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `train.seed` (and the ORBITGRAD_SEED variable).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a denoiser; writes checkpoint.bin, loss.csv and config.resolved.toml.
    Train {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// baseline, augment, orbdiff, orbdiff_exact, orbdiff_u or orbdiff_wn.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Draw samples from a checkpoint with ancestral sampling.
    Sample {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
    },
    /// RMSD and W2 of a 1D samples file against target atoms; prints JSON.
    Eval {
        #[arg(long)]
        samples: PathBuf,
        /// Comma-separated atoms, e.g. "-1,1".
        #[arg(long, allow_hyphen_values = true)]
        targets: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gradient variance per variant and timestep; writes CSV.
    Variance {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Parameters to probe; a fresh initialization when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "100,500,900")]
        timesteps: String,
        #[arg(long, default_value_t = 1000)]
        repeats: usize,
        #[arg(long, default_value = "baseline,augment,orbdiff")]
        variants: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Equivariance error of a checkpoint per timestep; writes CSV.
    Equivariance {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "100,500,900")]
        timesteps: String,
        #[arg(long, default_value_t = 256)]
        probes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run property checks against closed forms and brute-force references.
    Oracle {
        /// all, groups, kernels, estimator or flow.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericalDivergence(_) | Error::DegenerateWeights => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

fn load_config(arg: &ConfigArg) -> Result<ExperimentConfig> {
    let mut cfg = match &arg.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = arg.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad {what} entry `{s}`")))
        })
        .collect()
}

fn load_checkpoint(path: &Path) -> Result<Denoiser> {
    let f = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Denoiser::read_checkpoint(std::io::BufReader::new(f))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes one sample per row with columns `x0,x1,...`.
pub fn write_samples(path: &Path, samples: &[Point]) -> Result<()> {
    let dim = samples.first().map_or(0, Point::dim);
    let mut text = (0..dim)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for s in samples {
        let row: Vec<String> = s.coords.iter().map(|v| format!("{v:e}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_file(path, &text)
}

/// Reads a file written by [`write_samples`].
pub fn read_samples(path: &Path) -> Result<Vec<Point>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{} is empty", path.display())))?;
    lines
        .enumerate()
        .map(|(i, l)| {
            parse_list::<f64>(l, "sample")
                .map(Point::euclidean)
                .map_err(|_| Error::InvalidInput(format!("{}: bad row {}", path.display(), i + 2)))
        })
        .collect()
}

fn run_train(
    cfg: ExperimentConfig,
    out: &Path,
    variant: Option<String>,
    iterations: Option<usize>,
) -> Result<()> {
    let mut cfg = cfg;
    if let Some(v) = variant {
        cfg.train.variant = v;
    }
    if let Some(n) = iterations {
        cfg.train.iterations = n;
    }
    let problem = cfg.build_problem()?;
    let train_cfg = cfg.train_config(cfg.variant(&cfg.train.variant)?)?;
    let init = cfg.init_denoiser(problem.dataset.dim())?;
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    write_file(&out.join("config.resolved.toml"), &cfg.to_toml())?;
    let (outcome, failure) = match train_loop(init, &problem, &train_cfg) {
        Ok(o) => (o, None),
        Err(abort) => (abort.outcome, Some(abort.error)),
    };
    let mut loss = String::from("iteration,loss\n");
    for (it, l) in outcome.trace(cfg.train.log_every.max(1)) {
        loss.push_str(&format!("{it},{l:e}\n"));
    }
    write_file(&out.join("loss.csv"), &loss)?;
    let path = out.join("checkpoint.bin");
    let f = fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(f);
    outcome.denoiser.write_checkpoint(&mut w)?;
    w.flush()?;
    match failure {
        Some(e) => Err(e),
        None => {
            println!(
                "trained {} for {} iterations; final loss {:.6e}",
                train_cfg.variant.name(),
                outcome.losses.len(),
                outcome.tail_mean(100)
            );
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train {
            cfg,
            out,
            variant,
            iterations,
        } => {
            run_train(load_config(&cfg)?, &out, variant, iterations)?;
        }
        Command::Sample {
            cfg,
            checkpoint,
            out,
            n,
        } => {
            let cfg = load_config(&cfg)?;
            if cfg.space() != crate::point::Space::Euclidean {
                return Err(Error::InvalidConfig(
                    "sampling is implemented for Euclidean data only".into(),
                ));
            }
            let denoiser = load_checkpoint(&checkpoint)?;
            let schedule = cfg.build_schedule()?;
            let run = SampleRun {
                n_samples: n.unwrap_or(cfg.sample.n),
                seed: cfg.train.seed,
                method: Method::Ancestral,
                antithetic: cfg.sample.antithetic,
            };
            write_samples(&out, &ancestral_sample(&denoiser, &schedule, &run)?)?;
        }
        Command::Eval {
            samples,
            targets,
            seed,
        } => {
            let atoms: Vec<f64> = parse_list(&targets, "target")?;
            let metrics = evaluate_1d(&read_samples(&samples)?, &atoms, seed)?;
            println!(
                "{}",
                serde_json::to_string(&metrics).expect("metrics serialize")
            );
        }
        Command::Variance {
            cfg,
            checkpoint,
            timesteps,
            repeats,
            variants,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            let problem = cfg.build_problem()?;
            let denoiser = match checkpoint {
                Some(p) => load_checkpoint(&p)?,
                None => cfg.init_denoiser(problem.dataset.dim())?,
            };
            let ts: Vec<usize> = parse_list(&timesteps, "timestep")?;
            let vs = variants
                .split(',')
                .map(|v| Ok((v.trim().to_string(), cfg.variant(v.trim())?)))
                .collect::<Result<Vec<_>>>()?;
            let stats =
                gradient_variance_sweep(&denoiser, &problem, &ts, repeats, &vs, cfg.train.seed)?;
            let mut text = String::from("variant,t,K,grad_norm_var,mean_component_var\n");
            for s in stats {
                text.push_str(&format!(
                    "{},{},{},{:e},{:e}\n",
                    s.label, s.t, s.repeats, s.grad_norm_var, s.mean_component_var
                ));
            }
            write_file(&out, &text)?;
        }
        Command::Equivariance {
            cfg,
            checkpoint,
            timesteps,
            probes,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            let problem = cfg.build_problem()?;
            let denoiser = load_checkpoint(&checkpoint)?;
            let ts: Vec<usize> = parse_list(&timesteps, "timestep")?;
            let group = GroupSampler::uniform(cfg.group_kind());
            let errs =
                equivariance_error(&denoiser, &problem, &group, &ts, probes, cfg.train.seed)?;
            let mut text = String::from("t,error\n");
            for (t, e) in errs {
                text.push_str(&format!("{t},{e:e}\n"));
            }
            write_file(&out, &text)?;
        }
        Command::Oracle { suite, seed } => {
            let results = run_suite(&suite, seed)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "{} {:<10} {:<55} {:.3e} (< {:.1e})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.suite,
                    r.name,
                    r.value,
                    r.threshold
                );
                failed += usize::from(!r.passed);
            }
            println!("{} passed, {} failed", results.len() - failed, failed);
            if failed > 0 {
                return Ok(EXIT_CHECK);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
