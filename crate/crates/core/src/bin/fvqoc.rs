use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fvqoc_core::config::{load_config, BenchmarkConfig, ConvergenceConfig, Experiment, RunConfig};
use fvqoc_core::experiments::{self, OutputDir};
use fvqoc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fvqoc", version, about = "Noise-aware pulse optimization with stochastic Schrodinger equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trial parallelism.
    #[arg(long, env = "FVQOC_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble for a fixed pulse.
    Simulate(Common),
    /// VQOC and F-VQOC descent on a state-preparation problem.
    Optimize(Common),
    /// Gate optimization towards a target unitary.
    Gate(Common),
    /// Randomized single-qubit benchmark of F-VQOC against VQOC.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        problems: Option<usize>,
        /// Noise scales with the control amplitude.
        #[arg(long)]
        scaled: bool,
    },
    /// Analytic and Monte Carlo oracle comparisons.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Ten times fewer trials; for smoke testing only.
        #[arg(long)]
        quick: bool,
    },
    /// Weak-order convergence of the integrators.
    Convergence(Common),
}

fn resolve(common: &Common, experiment: Experiment) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = load_config(path).map_err(|e| match e {
                Error::Io(io) => Error::config(path.display().to_string(), io.to_string()),
                other => other,
            })?;
            if cfg.experiment != experiment {
                return Err(Error::config("experiment", format!("configuration is for {:?}", cfg.experiment)));
            }
            cfg
        }
        None => RunConfig {
            experiment,
            seed: 0,
            output: None,
            threads: None,
            problem: None,
            benchmark: None,
            gate: None,
            simulate: None,
            convergence: None,
        },
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.display().to_string());
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool> {
    let (cfg, quick) = match cli.command {
        Command::Simulate(c) => (resolve(&c, Experiment::Simulate)?, false),
        Command::Optimize(c) => (resolve(&c, Experiment::Optimize)?, false),
        Command::Gate(c) => (resolve(&c, Experiment::Gate)?, false),
        Command::Convergence(c) => {
            let mut cfg = resolve(&c, Experiment::Convergence)?;
            cfg.convergence.get_or_insert(ConvergenceConfig {
                paths: 100_000,
                dts: fvqoc_core::checks::WEAK_ORDER_DTS.to_vec(),
            });
            (cfg, false)
        }
        Command::Benchmark { common, problems, scaled } => {
            let mut cfg = resolve(&common, Experiment::Benchmark)?;
            let b = cfg.benchmark.get_or_insert(BenchmarkConfig { problems: 50, noise_bound: 0.1, scaled: false });
            if let Some(n) = problems {
                b.problems = n;
            }
            b.scaled |= scaled;
            (cfg, false)
        }
        Command::OracleCheck { common, quick } => (resolve(&common, Experiment::OracleCheck)?, quick),
    };
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    let out = OutputDir::create(cfg.output.clone().unwrap_or_else(|| "results".into()))?;
    let passed = if cfg.experiment == Experiment::OracleCheck {
        let (summary, all) = experiments::run_oracle_check(&cfg, &out, quick)?;
        out.write_json("summary.json", &summary)?;
        for c in summary["checks"].as_array().into_iter().flatten() {
            println!(
                "{} {}: {}",
                if c["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
                c["name"].as_str().unwrap_or(""),
                c["detail"].as_str().unwrap_or("")
            );
        }
        all
    } else {
        let summary = experiments::run(&cfg, &out)?;
        println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
        true
    };
    eprintln!("results written to {}", out.path().display());
    Ok(passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiments::exit_code(&e) as u8)
        }
    }
}
