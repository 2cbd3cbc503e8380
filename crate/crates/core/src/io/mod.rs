//! Configuration, spectrum files, result persistence and task dispatch.

mod config;
mod output;
mod spectrum;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

pub use config::{load_bounds, load_config, parse_config, ConfigError, DipoleSection, RunConfig, Task, DEFAULT_DEPTH_FRACTION};
pub use output::OutputDir;
pub use spectrum::{load_spectrum, parse_spectrum, synthetic_snv, SpectrumError};

use crate::farfield::{self, AngularGrid, FarFieldError, Transform};
use crate::geometry::{DipoleSource, Scene};
use crate::merit::{self, MeritError, MeritReport, Metric, SensitivityResult};
use crate::optimizer::{self, Evaluation, IncSpace, OptimizationTrace, OptimizerError};
use crate::solver::{self, SolverError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const THREADS_ENV: &str = "NANOCONE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Merit(#[from] MeritError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    FarField(#[from] FarFieldError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
}

impl TaskError {
    pub fn exit_code(&self) -> i32 {
        match self {
            TaskError::Config(_) | TaskError::Spectrum(_) => EXIT_CONFIG,
            TaskError::Merit(e) if e.is_numerical() => EXIT_NUMERICAL,
            TaskError::Merit(MeritError::Solver(_)) | TaskError::Merit(MeritError::FarField(FarFieldError::NoPower)) => EXIT_NUMERICAL,
            TaskError::Merit(_) => EXIT_CONFIG,
            TaskError::Solver(SolverError::Diverged { .. } | SolverError::Unconverged { .. }) => EXIT_NUMERICAL,
            TaskError::Solver(_) => EXIT_CONFIG,
            TaskError::FarField(FarFieldError::NoPower) => EXIT_NUMERICAL,
            TaskError::FarField(FarFieldError::Io(_) | FarFieldError::Csv(_) | FarFieldError::Json(_)) => EXIT_FAILURE,
            TaskError::FarField(_) => EXIT_CONFIG,
            TaskError::Optimizer(OptimizerError::TooManyFailures { .. } | OptimizerError::Degenerate) => EXIT_NUMERICAL,
            TaskError::Optimizer(OptimizerError::Io(_)) => EXIT_FAILURE,
            TaskError::Optimizer(_) => EXIT_CONFIG,
            TaskError::Io(_) | TaskError::Csv(_) => EXIT_FAILURE,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config",
            EXIT_NUMERICAL => "numerical",
            _ => "io",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() } })
    }
}

/// Sizes the global worker pool from `NANOCONE_THREADS` if set. Returns the
/// number of workers.
pub fn init_threads() -> Result<usize, ConfigError> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => return Err(ConfigError::Invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => None,
    };
    if let Some(n) = n {
        // A pool configured earlier in the process wins.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("worker pool already initialized");
        }
    }
    Ok(rayon::current_num_threads())
}

#[derive(Serialize)]
struct ReportFile<'a, T: Serialize> {
    schema_version: u32,
    code_version: &'a str,
    task: &'a str,
    config: &'a RunConfig,
    dipole_resolved: DipoleSource,
    result: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeResult {
    pub fom: Metric,
    pub evaluations: usize,
    pub failures: usize,
    pub best_params: Vec<f64>,
    pub parameter_names: Vec<String>,
    pub best_search_value: f64,
    pub search_ppw: f64,
    /// The incumbent re-evaluated at the verification resolution.
    pub verification: MeritReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct BroadbandResult {
    pub metric: Metric,
    pub average: f64,
    pub curve: Vec<(f64, f64)>,
    pub spectrum_source: String,
    pub magnification_reoptimized_per_wavelength: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FarFieldResult {
    pub eta_fs: f64,
    pub emitted_power: f64,
    pub upper_hemisphere_fraction: f64,
    pub farfield_csv: String,
    pub field_dump: Option<String>,
}

/// Outcome of a task: the report location plus one summary line per
/// figure of merit.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub dir: PathBuf,
    pub report: PathBuf,
    pub summary: Vec<String>,
}

fn write_report<T: Serialize>(out: &OutputDir, cfg: &RunConfig, result: T) -> std::io::Result<PathBuf> {
    out.write_json(
        "report.json",
        &ReportFile {
            schema_version: crate::SCHEMA_VERSION,
            code_version: crate::CODE_VERSION,
            task: cfg.task.name(),
            config: cfg,
            dipole_resolved: cfg.dipole(),
            result,
        },
    )
}

fn merit_lines(r: &MeritReport) -> Vec<String> {
    vec![
        format!("eta_fs = {:.4}", r.eta_fs),
        format!(
            "eta_fib = {:.4} ({:?} polarization, M = {:.2}{})",
            r.eta_fib,
            r.polarization,
            r.magnification,
            if r.magnification_at_boundary { ", at search boundary" } else { "" }
        ),
        format!("purcell_F = {:.4}", r.purcell_factor),
        format!("rate_R = {:.4}", r.rate_enhancement),
    ]
}

/// Validates `cfg`, runs its task and writes all artifacts into `out`.
pub fn run_task(cfg: &RunConfig, out: &OutputDir) -> Result<TaskOutcome, TaskError> {
    cfg.validate()?;
    let started = chrono::Local::now();
    let clock = Instant::now();
    let g = cfg.geometry;
    let d = cfg.dipole();
    let pipeline = cfg.pipeline();
    let (report, summary) = match &cfg.task {
        Task::Simulate {} => {
            let r = pipeline.evaluate(&g, &d)?;
            (write_report(out, cfg, &r)?, merit_lines(&r))
        }
        Task::Optimize { fom, bounds, search_ppw, verify_ppw, resume, .. } => {
            let space = IncSpace::new(g, d, bounds).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let settings = cfg.optimizer_settings().expect("optimize task");
            let search = merit::Pipeline { solver: cfg.solver.clone().with_resolution(*search_ppw), ..pipeline.clone() };
            let objective = |x: &[f64]| -> Result<Evaluation, String> {
                let (g, d) = space.design(x);
                search
                    .metric(*fom, &g, &d)
                    .map(|value| Evaluation { value, info: json!({ "ppw": search_ppw }) })
                    .map_err(|e| e.to_string())
            };
            let previous = resume.as_deref().map(OptimizationTrace::read).transpose()?;
            let trace = optimizer::optimize(
                &format!("inc:{fom}"),
                &space.space,
                objective,
                &settings,
                Some(&out.path("trace.jsonl")),
                previous,
            )?;
            let best = trace.best().ok_or(OptimizerError::TooManyFailures { failed: trace.failures(), total: trace.observations.len() })?;
            let (bg, bd) = space.design(&best.params);
            let verify = merit::Pipeline { solver: cfg.solver.clone().with_resolution(*verify_ppw), ..pipeline.clone() };
            let verification = verify.evaluate(&bg, &bd)?;
            let incumbent: Vec<(f64, f64)> =
                trace.observations.iter().filter_map(|o| o.incumbent.map(|v| (o.index as f64, v))).collect();
            out.write_curve("incumbent", fom.name(), &incumbent)?;
            let result = OptimizeResult {
                fom: *fom,
                evaluations: trace.observations.len(),
                failures: trace.failures(),
                best_params: best.params.clone(),
                parameter_names: space.space.dims.iter().map(|d| d.name.clone()).collect(),
                best_search_value: best.value.expect("best has a value"),
                search_ppw: *search_ppw,
                verification,
            };
            let mut lines = vec![format!(
                "best {} = {:.4} at {} ({} evaluations, {} failed)",
                fom.name(),
                result.best_search_value,
                result.parameter_names.iter().zip(&result.best_params).map(|(n, v)| format!("{n}={v:.1}")).collect::<Vec<_>>().join(" "),
                result.evaluations,
                result.failures
            )];
            lines.extend(merit_lines(&result.verification).into_iter().map(|l| format!("verified {l}")));
            (write_report(out, cfg, &result)?, lines)
        }
        Task::Sweep { metric, precision_nm, n_points } => {
            let r: SensitivityResult = pipeline.sensitivity(*metric, &g, &d, *precision_nm, *n_points)?;
            for c in &r.curves {
                out.write_curve(&format!("sweep_{}", c.parameter.name()), metric.name(), &c.samples)?;
            }
            let line = format!("S({}) = {:.4} (nominal {:.4}, ±{} nm)", metric.name(), r.score, r.nominal, precision_nm);
            (write_report(out, cfg, &r)?, vec![line])
        }
        Task::Broadband { metric, spectrum, samples, window_nm } => {
            let window = (window_nm[0], window_nm[1]);
            let (spec, source) = match spectrum {
                Some(p) => (load_spectrum(p, window)?, p.display().to_string()),
                None => (synthetic_snv().clipped(window.0, window.1)?, "bundled synthetic SnV-like spectrum".to_string()),
            };
            let wl = merit::wavelength_grid(window.0, window.1, *samples);
            let curve = pipeline.spectral_curve(*metric, &g, &d, &wl)?;
            let average = merit::broadband_average(&curve, &spec)?;
            out.write_curve(&format!("spectral_{}", metric.name()), metric.name(), &curve)?;
            let reopt = matches!(cfg.optics.magnification, merit::MagnificationPolicy::Optimize { .. });
            let result = BroadbandResult { metric: *metric, average, curve, spectrum_source: source, magnification_reoptimized_per_wavelength: reopt };
            let line = format!("<{}>_lambda = {:.4}", metric.name(), average);
            (write_report(out, cfg, &result)?, vec![line])
        }
        Task::ExportFarfield { n_theta, n_phi } => {
            g.validate().map_err(MeritError::from)?;
            let fields = solver::simulate(&Scene::Cone(g), &d, &cfg.solver)?;
            let grid = AngularGrid::hemisphere(*n_phi, *n_theta);
            let ff = farfield::near_to_far_on(&fields, &grid, Transform::Fast)?;
            let dir = out.path("farfield");
            ff.export(&dir, "farfield")?;
            let field_dump = match &fields.plane {
                Some(plane) => {
                    let p = out.path("field_plane.bin");
                    plane.write_to(std::io::BufWriter::new(std::fs::File::create(&p)?))?;
                    Some("field_plane.bin".to_string())
                }
                None => None,
            };
            let eta_fs = farfield::eta_fs(&ff, &farfield::CollectionOptics::new(cfg.optics.numerical_aperture)?)?;
            let result = FarFieldResult {
                eta_fs,
                emitted_power: fields.emitted_power,
                upper_hemisphere_fraction: ff.hemisphere_power() / ff.total_emitted_power,
                farfield_csv: "farfield/farfield.csv".into(),
                field_dump,
            };
            let lines = vec![format!("eta_fs = {eta_fs:.4}"), format!("upper_hemisphere = {:.4}", result.upper_hemisphere_fraction)];
            (write_report(out, cfg, &result)?, lines)
        }
    };
    out.write_json(
        "run.json",
        &json!({
            "schema_version": crate::SCHEMA_VERSION,
            "code_version": crate::CODE_VERSION,
            "task": cfg.task.name(),
            "started": started.to_rfc3339(),
            "finished": chrono::Local::now().to_rfc3339(),
            "elapsed_s": clock.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
        }),
    )?;
    Ok(TaskOutcome { dir: out.root.clone(), report, summary })
}

/// Loads `path` and runs it in a fresh timestamped directory under `base`.
pub fn run_config_file(path: &Path, base: &Path) -> Result<TaskOutcome, TaskError> {
    let cfg = load_config(path)?;
    let out = OutputDir::create(base, cfg.task.name())?;
    run_task(&cfg, &out)
}
