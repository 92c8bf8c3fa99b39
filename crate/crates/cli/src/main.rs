use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use discrete_stein::baselines::{exact_mc_sample, parallel_chains};
use discrete_stein::experiment::{compare_report, read_timings, run_experiment, ExperimentConfig, ResultTable, Timings};
use discrete_stein::gof::{run_gof_test, GofConfig};
use discrete_stein::models::ModelSpec;
use discrete_stein::numkit::RandomStream;
use discrete_stein::sampler::{read_samples, sample_model, write_samples, SamplerConfig};
use discrete_stein::transform::{ContinuousParameterization, SurrogateMode};
use discrete_stein::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "discrete-stein",
    version,
    about = "Gradient-free Stein sampling and testing for discrete models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleMethod {
    Gfsvgd,
    Gibbs,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurrogateArg {
    BaseOnly,
    Smooth,
}

impl From<SurrogateArg> for SurrogateMode {
    fn from(s: SurrogateArg) -> Self {
        match s {
            SurrogateArg::BaseOnly => SurrogateMode::BaseOnly,
            SurrogateArg::Smooth => SurrogateMode::Smooth,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write results under its output directory.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize one or more results.csv files.
    Report {
        #[arg(required = true)]
        tables: Vec<PathBuf>,
        /// Write the Markdown report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Goodness-of-fit test of discrete data against a model; prints JSON.
    Gof {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, default_value_t = 1000)]
        bootstraps: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "base-only")]
        surrogate: SurrogateArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw samples from a model and write one state per CSV row.
    Sample {
        model: PathBuf,
        #[arg(long, value_enum)]
        method: SampleMethod,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        step_size: f64,
        #[arg(long, value_enum, default_value = "base-only")]
        surrogate: SurrogateArg,
        #[arg(long, default_value_t = 0.0)]
        init_mean: f64,
    },
}

/// Bad input maps to 2, numeric failures to 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) | Error::NonFiniteScore { .. } | Error::DegenerateEnsemble => EXIT_PARTIAL,
        _ => EXIT_CONFIG,
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e))
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("DISCRETE_STEIN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("DISCRETE_STEIN_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot size the thread pool: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if out.is_some() {
                cfg.output_dir = out;
            }
            match run_experiment(&cfg) {
                Ok(o) => {
                    println!(
                        "{}: {} rows written to {}",
                        cfg.name,
                        o.table.rows.len(),
                        o.output_dir.join("results.csv").display()
                    );
                    if o.failed_cells > 0 {
                        eprintln!(
                            "{} cells failed; see {}",
                            o.failed_cells,
                            o.output_dir.join("failures.log").display()
                        );
                        return ExitCode::from(EXIT_PARTIAL);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Report { tables, out } => {
            let mut loaded = Vec::new();
            let mut timings = Timings::new();
            for path in &tables {
                match ResultTable::read_csv(path) {
                    Ok(t) => loaded.push(t),
                    Err(e) => return fail(&e),
                }
                let tp = path.with_file_name("timings.csv");
                if tp.is_file() {
                    match read_timings(&tp) {
                        Ok(t) => timings.extend(t),
                        Err(e) => return fail(&e),
                    }
                }
            }
            let report = match compare_report(&loaded, &timings) {
                Ok(r) => r.to_markdown(),
                Err(e) => return fail(&e),
            };
            match out {
                Some(p) => {
                    if let Err(e) = std::fs::write(&p, report) {
                        return fail(&e.into());
                    }
                }
                None => print!("{report}"),
            }
            ExitCode::SUCCESS
        }
        Command::Gof {
            model,
            data,
            bootstraps,
            alpha,
            surrogate,
            seed,
        } => {
            let run = || -> discrete_stein::Result<String> {
                let model = ModelSpec::load(&model)?;
                let data = read_samples(&data)?;
                let cp = ContinuousParameterization::gaussian(model)?;
                let cfg = GofConfig {
                    bootstraps,
                    alpha,
                    surrogate: surrogate.into(),
                    ..GofConfig::default()
                };
                let r = run_gof_test(&data, &cp, &cfg, seed)?;
                Ok(serde_json::json!({
                    "statistic": r.statistic,
                    "p_value": r.p_value,
                    "reject": r.reject,
                    "alpha": r.alpha,
                    "m": r.m,
                    "n": r.n,
                    "seed": r.seed,
                })
                .to_string())
            };
            match run() {
                Ok(s) => {
                    println!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Sample {
            model,
            method,
            n,
            iters,
            seed,
            out,
            step_size,
            surrogate,
            init_mean,
        } => {
            let run = || -> discrete_stein::Result<()> {
                let model = ModelSpec::load(&model)?;
                if n == 0 {
                    return Err(Error::Argument("--n must be positive".into()));
                }
                let samples = match method {
                    SampleMethod::Gfsvgd => {
                        let cfg = SamplerConfig {
                            step_size,
                            iterations: iters,
                            seed,
                            init_mean,
                            ..SamplerConfig::default()
                        };
                        let cp = ContinuousParameterization::gaussian(model)?;
                        sample_model(&cp, surrogate.into(), n, &cfg)?.samples
                    }
                    SampleMethod::Gibbs => parallel_chains(&model, n, iters, init_mean, seed)?,
                    SampleMethod::Mc => exact_mc_sample(&model, n, &mut RandomStream::new(seed))?,
                };
                write_samples(&out, &samples)
            };
            match run() {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
    }
}
