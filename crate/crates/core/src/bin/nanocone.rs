use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nanocone::io::{self, ConfigError, OutputDir, RunConfig, Task, TaskError};
use nanocone::merit::Metric;

#[derive(Parser)]
#[command(name = "nanocone", version, about = "Inverted-nanocone emitter simulation and optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a config file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Bayesian optimization of the cone geometry.
    Optimize {
        /// Template config; its geometry, dipole, fiber, optics and solver
        /// sections are kept and the task is replaced.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_metric)]
        fom: Metric,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        bounds_file: Option<PathBuf>,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        search_ppw: Option<f64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Simulate a design and write its far field as CSV + JSON.
    ExportFarfield {
        config: PathBuf,
        #[arg(long, default_value_t = 91)]
        n_theta: usize,
        #[arg(long, default_value_t = 181)]
        n_phi: usize,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse::<Metric>().map_err(|e| e.to_string())
}

const DEFAULT_TEMPLATE: &str = r#"{"geometry": {"h_nm": 1000, "rt_nm": 500}}"#;

fn optimize_config(
    config: Option<&Path>,
    fom: Metric,
    budget: Option<usize>,
    seed: Option<u64>,
    bounds_file: Option<&Path>,
    resume: Option<PathBuf>,
    search_ppw: Option<f64>,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = match config {
        Some(p) => io::load_config(p)?,
        None => io::parse_config(DEFAULT_TEMPLATE)?,
    };
    let (mut budget_v, mut initial, mut batch, mut bounds, mut search, mut verify) = (40, None, 1, Default::default(), 12.0, 18.0);
    if let Task::Optimize { budget, initial_points, batch: b, bounds: bd, search_ppw, verify_ppw, .. } = &cfg.task {
        (budget_v, initial, batch, bounds, search, verify) = (*budget, *initial_points, *b, bd.clone(), *search_ppw, *verify_ppw);
    }
    if let Some(p) = bounds_file {
        bounds = io::load_bounds(p)?;
    }
    cfg.task = Task::Optimize {
        fom,
        budget: budget.unwrap_or(budget_v),
        initial_points: initial,
        batch,
        bounds,
        search_ppw: search_ppw.unwrap_or(search),
        verify_ppw: verify,
        resume,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<io::TaskOutcome, TaskError> {
    io::init_threads()?;
    let (cfg, base) = match cmd {
        Command::Run { config, out } => (io::load_config(&config)?, out),
        Command::Optimize { config, fom, budget, seed, bounds_file, resume, search_ppw, out } => {
            (optimize_config(config.as_deref(), fom, budget, seed, bounds_file.as_deref(), resume, search_ppw)?, out)
        }
        Command::ExportFarfield { config, n_theta, n_phi, out } => {
            let mut cfg = io::load_config(&config)?;
            cfg.task = Task::ExportFarfield { n_theta, n_phi };
            (cfg, out)
        }
    };
    cfg.validate()?;
    let out = OutputDir::create(&base, cfg.task.name())?;
    log::info!("writing to {}", out.root.display());
    io::run_task(&cfg, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("report: {}", outcome.report.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
