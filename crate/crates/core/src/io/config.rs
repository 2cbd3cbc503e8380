//! Run configuration: JSON with unit-suffixed keys and documented defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fiber::FiberSpec;
use crate::geometry::{DipoleSource, IncGeometry};
use crate::merit::{Metric, Optics, DEFAULT_PRECISION_NM, DEFAULT_SPECTRAL_SAMPLES, DEFAULT_SWEEP_POINTS, SPECTRAL_WINDOW};
use crate::optimizer::{BoundsSpec, IncSpace, OptimizerSettings};
use crate::solver::SolverSettings;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("at `{path}`: key `{found}` has the wrong unit suffix, expected `{expected}`")]
    UnitSuffix { path: String, found: String, expected: String },
    #[error("{0}")]
    Invalid(String),
}

/// Emitter section; `dz_nm` defaults to 80% of the cone height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_nm: Option<f64>,
    #[serde(default)]
    pub dx_nm: f64,
    #[serde(default)]
    pub tilt_deg: f64,
    #[serde(default)]
    pub azimuth_deg: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
}

fn default_wavelength() -> f64 {
    619.0
}

impl Default for DipoleSection {
    fn default() -> Self {
        Self { dz_nm: None, dx_nm: 0.0, tilt_deg: 0.0, azimuth_deg: 0.0, wavelength_nm: default_wavelength() }
    }
}

pub const DEFAULT_DEPTH_FRACTION: f64 = 0.8;

impl DipoleSection {
    pub fn resolve(&self, g: &IncGeometry) -> DipoleSource {
        DipoleSource {
            d_z: self.dz_nm.unwrap_or(DEFAULT_DEPTH_FRACTION * g.h),
            d_x: self.dx_nm,
            polar_tilt: self.tilt_deg,
            azimuth: self.azimuth_deg,
            wavelength: self.wavelength_nm,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Full figure-of-merit report for the configured design.
    Simulate {},
    Optimize {
        fom: Metric,
        #[serde(default = "default_budget")]
        budget: usize,
        #[serde(default)]
        initial_points: Option<usize>,
        #[serde(default = "one")]
        batch: usize,
        #[serde(default)]
        bounds: BoundsSpec,
        #[serde(default = "default_search_ppw")]
        search_ppw: f64,
        #[serde(default = "default_verify_ppw")]
        verify_ppw: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resume: Option<PathBuf>,
    },
    Sweep {
        metric: Metric,
        #[serde(default = "default_precision")]
        precision_nm: f64,
        #[serde(default = "default_sweep_points")]
        n_points: usize,
    },
    Broadband {
        metric: Metric,
        /// Two-column CSV; the bundled synthetic spectrum when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spectrum: Option<PathBuf>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_window")]
        window_nm: [f64; 2],
    },
    #[serde(alias = "export-farfield")]
    ExportFarfield {
        #[serde(default = "default_n_theta")]
        n_theta: usize,
        #[serde(default = "default_n_phi")]
        n_phi: usize,
    },
}

fn default_budget() -> usize {
    40
}
fn one() -> usize {
    1
}
fn default_search_ppw() -> f64 {
    12.0
}
fn default_verify_ppw() -> f64 {
    18.0
}
fn default_precision() -> f64 {
    DEFAULT_PRECISION_NM
}
fn default_sweep_points() -> usize {
    DEFAULT_SWEEP_POINTS
}
fn default_samples() -> usize {
    DEFAULT_SPECTRAL_SAMPLES
}
fn default_window() -> [f64; 2] {
    [SPECTRAL_WINDOW.0, SPECTRAL_WINDOW.1]
}
fn default_n_theta() -> usize {
    91
}
fn default_n_phi() -> usize {
    181
}

impl Default for Task {
    fn default() -> Self {
        Task::Simulate {}
    }
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate {} => "simulate",
            Task::Optimize { .. } => "optimize",
            Task::Sweep { .. } => "sweep",
            Task::Broadband { .. } => "broadband",
            Task::ExportFarfield { .. } => "export_farfield",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: IncGeometry,
    #[serde(default)]
    pub dipole: DipoleSection,
    #[serde(default)]
    pub fiber: FiberSpec,
    #[serde(default)]
    pub optics: Optics,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn dipole(&self) -> DipoleSource {
        self.dipole.resolve(&self.geometry)
    }

    /// Fiber at the emitter wavelength.
    pub fn fiber(&self) -> FiberSpec {
        self.fiber.with_wavelength(self.dipole.wavelength_nm)
    }

    pub fn pipeline(&self) -> crate::merit::Pipeline {
        crate::merit::Pipeline { solver: self.solver.clone(), fiber: self.fiber(), optics: self.optics }
    }

    pub fn optimizer_settings(&self) -> Option<OptimizerSettings> {
        match &self.task {
            Task::Optimize { budget, initial_points, batch, .. } => Some(OptimizerSettings {
                budget: *budget,
                initial_points: *initial_points,
                seed: self.seed,
                batch: *batch,
                ..Default::default()
            }),
            _ => None,
        }
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.geometry.validate().map_err(|e| invalid(&e))?;
        let d = self.dipole();
        if d.d_z >= self.geometry.h {
            return Err(ConfigError::Invalid(format!(
                "dipole.dz_nm = {} must be smaller than geometry.h_nm = {} (emitter inside the cone)",
                d.d_z, self.geometry.h
            )));
        }
        d.validate_in(&self.geometry).map_err(|e| invalid(&e))?;
        self.fiber().validate().map_err(|e| invalid(&e))?;
        crate::farfield::CollectionOptics::new(self.optics.numerical_aperture).map_err(|e| invalid(&e))?;
        if let crate::merit::MagnificationPolicy::Fixed { value } = self.optics.magnification {
            crate::fiber::ImagingSystem::new(self.optics.numerical_aperture, value).map_err(|e| invalid(&e))?;
        }
        if let crate::merit::MagnificationPolicy::Optimize { min, max } = self.optics.magnification {
            if !(min >= self.optics.numerical_aperture && max > min) {
                return Err(ConfigError::Invalid(format!("magnification range [{min}, {max}] must satisfy NA <= min < max")));
            }
        }
        self.solver.validate().map_err(|e| invalid(&e))?;
        match &self.task {
            Task::Optimize { bounds, search_ppw, verify_ppw, .. } => {
                let space = IncSpace::new(self.geometry, d, bounds).map_err(|e| invalid(&e))?;
                self.optimizer_settings().expect("optimize task").validate(space.space.dim()).map_err(|e| invalid(&e))?;
                self.solver.clone().with_resolution(*search_ppw).validate().map_err(|e| invalid(&e))?;
                self.solver.clone().with_resolution(*verify_ppw).validate().map_err(|e| invalid(&e))?;
            }
            Task::Sweep { precision_nm, n_points, .. } => {
                crate::merit::sweep_offsets(*precision_nm, *n_points).map_err(|e| invalid(&e))?;
            }
            Task::Broadband { samples, window_nm, .. } => {
                if *samples < 2 {
                    return Err(ConfigError::Invalid(format!("broadband needs at least 2 samples, got {samples}")));
                }
                if !(window_nm[1] > window_nm[0] && window_nm[0] > 0.0) {
                    return Err(ConfigError::Invalid(format!("invalid spectral window {window_nm:?}")));
                }
            }
            Task::ExportFarfield { n_theta, n_phi } => {
                crate::farfield::AngularGrid::hemisphere(*n_phi, *n_theta).check().map_err(|e| invalid(&e))?;
            }
            Task::Simulate {} => {}
        }
        Ok(())
    }
}

const UNIT_SUFFIXES: [&str; 5] = ["nm", "um", "mm", "deg", "rad"];

fn stem(key: &str) -> &str {
    match key.rsplit_once('_') {
        Some((s, u)) if UNIT_SUFFIXES.contains(&u) => s,
        _ => key,
    }
}

/// Turns serde's "unknown field `x`, expected one of `a`, `b`" into a
/// unit-suffix diagnosis when `x` differs from a known key only by suffix.
fn diagnose_unknown(path: &str, message: &str) -> Option<ConfigError> {
    let rest = message.strip_prefix("unknown field `")?;
    let (found, rest) = rest.split_once('`')?;
    let expected: Vec<&str> = rest.split('`').skip(1).step_by(2).collect();
    let found_stem = stem(found);
    let hit = expected.iter().find(|e| **e != found && stem(e) == found_stem)?;
    Some(ConfigError::UnitSuffix { path: path.to_string(), found: found.to_string(), expected: hit.to_string() })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        diagnose_unknown(&path, &message).unwrap_or(ConfigError::Schema { path, message })
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub fn load_bounds(path: &Path) -> Result<BoundsSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        diagnose_unknown(&path, &message).unwrap_or(ConfigError::Schema { path, message })
    })
}
