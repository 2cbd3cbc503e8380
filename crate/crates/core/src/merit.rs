//! Figures of merit for a single design: collection and fiber-coupling
//! efficiencies, Purcell factor, rate enhancement, spectral averages and
//! the fabrication-insensitivity score.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::farfield::{self, CollectionOptics, FarFieldError};
use crate::fiber::{self, FiberError, FiberSpec, ImagingSystem, Polarization, DEFAULT_MAGNIFICATION_RANGE};
use crate::geometry::{DipoleSource, GeometryError, IncGeometry, Scene};
use crate::solver::{self, SolverError, SolverSettings};

#[derive(Debug, thiserror::Error)]
pub enum MeritError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    FarField(#[from] FarFieldError),
    #[error(transparent)]
    Fiber(#[from] FiberError),
    #[error("metric curve does not cover the spectrum: missing {missing:?} nm")]
    CoverageGap { missing: Vec<(f64, f64)> },
    #[error("invalid spectrum: {0}")]
    Spectrum(String),
    #[error("metric is zero at the nominal design; sensitivity score undefined")]
    UndefinedScore,
    #[error("invalid sweep: {0}")]
    Sweep(String),
}

impl MeritError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            MeritError::Solver(e) => matches!(e, SolverError::Diverged { .. } | SolverError::Unconverged { .. }),
            MeritError::FarField(FarFieldError::NoPower) | MeritError::Fiber(FiberError::NoRoot) => true,
            MeritError::UndefinedScore => true,
            _ => false,
        }
    }
}

/// Figure of merit ζ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "fib")]
    EtaFib,
    #[serde(rename = "fs")]
    EtaFs,
    #[serde(rename = "re")]
    Rate,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::EtaFib => "eta_fib",
            Metric::EtaFs => "eta_fs",
            Metric::Rate => "rate_enhancement",
        }
    }

    pub fn of(self, report: &MeritReport) -> f64 {
        match self {
            Metric::EtaFib => report.eta_fib,
            Metric::EtaFs => report.eta_fs,
            Metric::Rate => report.rate_enhancement,
        }
    }

    fn needs_fiber(self) -> bool {
        !matches!(self, Metric::EtaFs)
    }

    fn needs_purcell(self) -> bool {
        matches!(self, Metric::Rate)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::EtaFib => "fib",
            Metric::EtaFs => "fs",
            Metric::Rate => "re",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fib" => Ok(Metric::EtaFib),
            "fs" => Ok(Metric::EtaFs),
            "re" => Ok(Metric::Rate),
            other => Err(format!("unknown figure of merit `{other}` (expected fib, fs or re)")),
        }
    }
}

/// How the second-lens magnification is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", deny_unknown_fields)]
pub enum MagnificationPolicy {
    Optimize { min: f64, max: f64 },
    Fixed { value: f64 },
}

impl Default for MagnificationPolicy {
    fn default() -> Self {
        let (min, max) = DEFAULT_MAGNIFICATION_RANGE;
        MagnificationPolicy::Optimize { min, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optics {
    #[serde(rename = "na", default = "default_na")]
    pub numerical_aperture: f64,
    #[serde(default)]
    pub magnification: MagnificationPolicy,
}

fn default_na() -> f64 {
    0.9
}

impl Default for Optics {
    fn default() -> Self {
        Self { numerical_aperture: default_na(), magnification: MagnificationPolicy::default() }
    }
}

/// Discretization and convergence data of the run behind a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub points_per_wavelength: f64,
    pub cell_size_nm: f64,
    pub steps: usize,
    pub residual: f64,
    pub power_drift: f64,
    pub sub_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritReport {
    pub geometry: IncGeometry,
    pub dipole: DipoleSource,
    pub eta_fs: f64,
    pub eta_fib: f64,
    pub eta_fib_x: f64,
    pub eta_fib_y: f64,
    pub polarization: Polarization,
    pub purcell_factor: f64,
    pub rate_enhancement: f64,
    pub magnification: f64,
    pub magnification_optimized: bool,
    pub magnification_at_boundary: bool,
    /// Emitted power in the structure and in bulk host, source-normalized.
    pub structure_power: f64,
    pub bulk_power: f64,
    pub numerics: Numerics,
}

pub fn rate_enhancement(purcell: f64, eta_fib: f64) -> f64 {
    purcell * eta_fib
}

/// Everything besides the design that an evaluation depends on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Pipeline {
    pub solver: SolverSettings,
    pub fiber: FiberSpec,
    pub optics: Optics,
}

struct Partial {
    eta_fs: f64,
    coupling: Option<(fiber::FiberCoupling, f64, bool, bool)>,
    purcell: Option<solver::PurcellResult>,
    stats: solver::RunStats,
}

impl Pipeline {
    fn run(&self, g: &IncGeometry, d: &DipoleSource, fiber_needed: bool, purcell_needed: bool) -> Result<Partial, MeritError> {
        g.validate()?;
        d.validate_in(g)?;
        let scene = Scene::Cone(*g);
        let fields = solver::simulate(&scene, d, &self.solver)?;
        let ff = farfield::near_to_far(&fields)?;
        let optics = CollectionOptics::new(self.optics.numerical_aperture)?;
        let eta_fs = farfield::eta_fs(&ff, &optics)?;
        let coupling = if fiber_needed {
            let mode = fiber::solve_mode(&self.fiber.with_wavelength(d.wavelength))?;
            Some(match self.optics.magnification {
                MagnificationPolicy::Optimize { min, max } => {
                    let c = fiber::optimal_magnification(&ff, optics.numerical_aperture, &mode, (min, max))?;
                    (c.coupling, c.magnification, true, c.at_boundary)
                }
                MagnificationPolicy::Fixed { value } => {
                    let sys = ImagingSystem::new(optics.numerical_aperture, value)?;
                    (fiber::eta_fib(&ff, &sys, &mode)?, value, false, false)
                }
            })
        } else {
            None
        };
        let purcell = if purcell_needed { Some(solver::purcell_from_fields(&fields, &scene, d, &self.solver)?) } else { None };
        Ok(Partial { eta_fs, coupling, purcell, stats: fields.stats })
    }

    /// Full report for one design.
    pub fn evaluate(&self, g: &IncGeometry, d: &DipoleSource) -> Result<MeritReport, MeritError> {
        let p = self.run(g, d, true, true)?;
        let (coupling, magnification, optimized, at_boundary) = p.coupling.expect("fiber requested");
        let purcell = p.purcell.expect("purcell requested");
        let (eta_fib, polarization) = coupling.best();
        Ok(MeritReport {
            geometry: *g,
            dipole: *d,
            eta_fs: p.eta_fs,
            eta_fib,
            eta_fib_x: coupling.eta_x,
            eta_fib_y: coupling.eta_y,
            polarization,
            purcell_factor: purcell.factor,
            rate_enhancement: rate_enhancement(purcell.factor, eta_fib),
            magnification,
            magnification_optimized: optimized,
            magnification_at_boundary: at_boundary,
            structure_power: purcell.structure_power,
            bulk_power: purcell.bulk_power,
            numerics: Numerics {
                points_per_wavelength: self.solver.points_per_wavelength,
                cell_size_nm: p.stats.cell_size_nm,
                steps: p.stats.steps,
                residual: p.stats.residual,
                power_drift: p.stats.power_drift,
                sub_runs: p.stats.sub_runs,
            },
        })
    }

    /// One figure of merit, skipping stages it does not depend on.
    pub fn metric(&self, metric: Metric, g: &IncGeometry, d: &DipoleSource) -> Result<f64, MeritError> {
        let p = self.run(g, d, metric.needs_fiber(), metric.needs_purcell())?;
        let eta_fib = p.coupling.map(|c| c.0.best().0);
        Ok(match metric {
            Metric::EtaFs => p.eta_fs,
            Metric::EtaFib => eta_fib.expect("fiber requested"),
            Metric::Rate => rate_enhancement(p.purcell.expect("purcell requested").factor, eta_fib.expect("fiber requested")),
        })
    }

    /// `ζ(λ)` at each wavelength, evaluated concurrently.
    pub fn spectral_curve(
        &self,
        metric: Metric,
        g: &IncGeometry,
        d: &DipoleSource,
        wavelengths: &[f64],
    ) -> Result<Vec<(f64, f64)>, MeritError> {
        wavelengths
            .par_iter()
            .map(|&l| Ok((l, self.metric(metric, g, &d.with_wavelength(l))?)))
            .collect()
    }

    /// Sweeps each fabrication parameter about its nominal value.
    pub fn sensitivity(
        &self,
        metric: Metric,
        g: &IncGeometry,
        d: &DipoleSource,
        precision: f64,
        n_points: usize,
    ) -> Result<SensitivityResult, MeritError> {
        let params = SweepParameter::for_design(g);
        let offsets = sweep_offsets(precision, n_points)?;
        let mirror_symmetric = d.is_mirror_symmetric_in_x();
        // Distinct designs to evaluate; d_x → -d_x is a mirror image for
        // dipoles along or normal to the mirror plane.
        let mut jobs: Vec<(Option<SweepParameter>, f64)> = vec![(None, 0.0)];
        for &p in &params {
            for &o in &offsets {
                if o == 0.0 || (p == SweepParameter::Dx && mirror_symmetric && o < 0.0) {
                    continue;
                }
                jobs.push((Some(p), o));
            }
        }
        let values: Vec<f64> = jobs
            .par_iter()
            .map(|&(p, o)| {
                let (g2, d2) = match p {
                    Some(p) => p.apply(g, d, o),
                    None => (*g, *d),
                };
                self.metric(metric, &g2, &d2)
            })
            .collect::<Result<_, _>>()?;
        let lookup = |p: SweepParameter, o: f64| -> f64 {
            if o == 0.0 {
                return values[0];
            }
            let o = if p == SweepParameter::Dx && mirror_symmetric { o.abs() } else { o };
            let i = jobs.iter().position(|&(q, x)| q == Some(p) && x == o).expect("job scheduled");
            values[i]
        };
        sensitivity_from_samples(metric, &params, &offsets, |p, o| Ok(lookup(p, o)), g, d)
    }
}

/// Convenience wrapper around [`Pipeline::evaluate`].
pub fn evaluate(
    geometry: &IncGeometry,
    dipole: &DipoleSource,
    fiber: &FiberSpec,
    optics: &Optics,
    solver: &SolverSettings,
) -> Result<MeritReport, MeritError> {
    Pipeline { solver: solver.clone(), fiber: *fiber, optics: *optics }.evaluate(geometry, dipole)
}

// ---------------------------------------------------------------------------
// Spectral averaging

/// Emission spectrum normalized to unit area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    samples: Vec<(f64, f64)>,
}

pub const SPECTRAL_WINDOW: (f64, f64) = (580.0, 750.0);

impl Spectrum {
    /// Validates and normalizes `(wavelength nm, intensity)` samples.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, MeritError> {
        if samples.len() < 2 {
            return Err(MeritError::Spectrum("need at least two samples".into()));
        }
        for w in samples.windows(2) {
            if w[1].0 == w[0].0 {
                return Err(MeritError::Spectrum(format!("duplicate wavelength {} nm", w[0].0)));
            }
            if !(w[1].0 > w[0].0) {
                return Err(MeritError::Spectrum(format!("wavelengths not increasing at {} nm", w[1].0)));
            }
        }
        if let Some(&(l, i)) = samples.iter().find(|s| !(s.1 >= 0.0) || !s.0.is_finite() || !s.1.is_finite()) {
            return Err(MeritError::Spectrum(format!("invalid intensity {i} at {l} nm")));
        }
        let area = trapezoid(&samples);
        if !(area > 0.0) {
            return Err(MeritError::Spectrum("spectrum has zero area".into()));
        }
        Ok(Self { samples: samples.into_iter().map(|(l, i)| (l, i / area)).collect() })
    }

    /// Restricts to `[lo, hi]`, interpolating the end points, and renormalizes.
    pub fn clipped(&self, lo: f64, hi: f64) -> Result<Self, MeritError> {
        let (a, b) = self.support();
        let (lo, hi) = (lo.max(a), hi.min(b));
        if !(hi > lo) {
            return Err(MeritError::Spectrum(format!("no samples left in window [{lo}, {hi}] nm")));
        }
        let mut s = vec![(lo, self.density(lo))];
        s.extend(self.samples.iter().copied().filter(|&(l, _)| l > lo && l < hi));
        s.push((hi, self.density(hi)));
        Self::new(s)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn support(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Normalized intensity at `wavelength`, zero outside the support.
    pub fn density(&self, wavelength: f64) -> f64 {
        interpolate(&self.samples, wavelength).unwrap_or(0.0)
    }

    /// Wavelength of maximum intensity.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold((0.0, f64::MIN), |a, &s| if s.1 > a.1 { s } else { a }).0
    }
}

fn trapezoid(s: &[(f64, f64)]) -> f64 {
    s.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

fn interpolate(s: &[(f64, f64)], x: f64) -> Option<f64> {
    let i = s.partition_point(|p| p.0 < x);
    if i < s.len() && s[i].0 == x {
        return Some(s[i].1);
    }
    if i == 0 || i == s.len() {
        return None;
    }
    let (a, b) = (s[i - 1], s[i]);
    Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
}

/// `⟨ζ⟩_λ = ∫ ζ(λ) I(λ) dλ` with `ζ` linearly interpolated between samples.
pub fn broadband_average(curve: &[(f64, f64)], spectrum: &Spectrum) -> Result<f64, MeritError> {
    let (lo, hi) = spectrum.support();
    let tol = 1e-9 * hi;
    let mut missing = Vec::new();
    match (curve.first(), curve.last()) {
        (Some(&(a, _)), Some(&(b, _))) => {
            if a > lo + tol {
                missing.push((lo, a.min(hi)));
            }
            if b < hi - tol {
                missing.push((b.max(lo), hi));
            }
        }
        _ => missing.push((lo, hi)),
    }
    if !missing.is_empty() {
        return Err(MeritError::CoverageGap { missing });
    }
    if curve.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(MeritError::Sweep("metric curve wavelengths must increase".into()));
    }
    let zeta = |l: f64| interpolate(curve, l.clamp(curve[0].0, curve[curve.len() - 1].0)).expect("inside curve");
    let mut nodes: Vec<f64> = spectrum.samples.iter().map(|s| s.0).collect();
    nodes.extend(curve.iter().map(|c| c.0).filter(|&l| l > lo && l < hi));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let pts: Vec<(f64, f64)> = nodes.iter().map(|&l| (l, zeta(l) * spectrum.density(l))).collect();
    Ok(trapezoid(&pts))
}

/// `n` uniformly spaced wavelengths spanning `[lo, hi]`.
pub fn wavelength_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub const DEFAULT_SPECTRAL_SAMPLES: usize = 18;

// ---------------------------------------------------------------------------
// Fabrication insensitivity

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    H,
    Rt,
    Dz,
    Dx,
    Coating,
}

impl SweepParameter {
    pub fn for_design(g: &IncGeometry) -> Vec<SweepParameter> {
        let mut v = vec![SweepParameter::H, SweepParameter::Rt, SweepParameter::Dz, SweepParameter::Dx];
        if g.coating_thickness > 0.0 {
            v.push(SweepParameter::Coating);
        }
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::H => "h_nm",
            SweepParameter::Rt => "rt_nm",
            SweepParameter::Dz => "dz_nm",
            SweepParameter::Dx => "dx_nm",
            SweepParameter::Coating => "coating_nm",
        }
    }

    pub fn nominal(self, g: &IncGeometry, d: &DipoleSource) -> f64 {
        match self {
            SweepParameter::H => g.h,
            SweepParameter::Rt => g.r_t,
            SweepParameter::Dz => d.d_z,
            SweepParameter::Dx => d.d_x,
            SweepParameter::Coating => g.coating_thickness,
        }
    }

    /// Design with this parameter shifted by `offset` nm.
    pub fn apply(self, g: &IncGeometry, d: &DipoleSource, offset: f64) -> (IncGeometry, DipoleSource) {
        let (mut g, mut d) = (*g, *d);
        match self {
            SweepParameter::H => g.h += offset,
            SweepParameter::Rt => g.r_t += offset,
            SweepParameter::Dz => d.d_z += offset,
            SweepParameter::Dx => d.d_x += offset,
            SweepParameter::Coating => g.coating_thickness += offset,
        }
        (g, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub parameter: SweepParameter,
    /// `(parameter value nm, ζ)`, nominal included.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub metric: Metric,
    pub precision_nm: f64,
    pub nominal: f64,
    pub curves: Vec<SweepCurve>,
    pub score: f64,
}

/// Offsets `-precision..=precision` at `n_points` odd.
pub fn sweep_offsets(precision: f64, n_points: usize) -> Result<Vec<f64>, MeritError> {
    if !(precision > 0.0) {
        return Err(MeritError::Sweep(format!("precision {precision} nm must be positive")));
    }
    if n_points < 3 || n_points % 2 == 0 {
        return Err(MeritError::Sweep(format!("n_points {n_points} must be odd and at least 3")));
    }
    let half = (n_points / 2) as f64;
    Ok((0..n_points).map(|i| if i == n_points / 2 { 0.0 } else { precision * (i as f64 - half) / half }).collect())
}

/// Score `S = mean ζ(sample)/ζ(nominal)` over all off-nominal sweep samples,
/// with `zeta(parameter, offset)` supplying the metric.
pub fn sensitivity_from_samples(
    metric: Metric,
    params: &[SweepParameter],
    offsets: &[f64],
    mut zeta: impl FnMut(SweepParameter, f64) -> Result<f64, MeritError>,
    g: &IncGeometry,
    d: &DipoleSource,
) -> Result<SensitivityResult, MeritError> {
    let nominal = zeta(params[0], 0.0)?;
    if nominal == 0.0 {
        return Err(MeritError::UndefinedScore);
    }
    let mut curves = Vec::with_capacity(params.len());
    let (mut sum, mut count) = (0.0, 0usize);
    for &p in params {
        let p0 = p.nominal(g, d);
        let mut samples = Vec::with_capacity(offsets.len());
        for &o in offsets {
            let z = if o == 0.0 { nominal } else { zeta(p, o)? };
            if o != 0.0 {
                sum += z / nominal;
                count += 1;
            }
            samples.push((p0 + o, z));
        }
        curves.push(SweepCurve { parameter: p, samples });
    }
    let precision = offsets.iter().fold(0.0f64, |a, &o| a.max(o.abs()));
    Ok(SensitivityResult { metric, precision_nm: precision, nominal, curves, score: sum / count as f64 })
}

/// Sensitivity with the default ±10 nm, 5-point sweeps.
pub fn sensitivity_score(
    pipeline: &Pipeline,
    geometry: &IncGeometry,
    dipole: &DipoleSource,
    metric: Metric,
    precision: f64,
    n_points: usize,
) -> Result<SensitivityResult, MeritError> {
    pipeline.sensitivity(metric, geometry, dipole, precision, n_points)
}

pub const DEFAULT_PRECISION_NM: f64 = 10.0;
pub const DEFAULT_SWEEP_POINTS: usize = 5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_inc, IndexSet};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rate_products() {
        assert_relative_eq!(rate_enhancement(0.39, 0.66), 0.2574, epsilon = 1e-12);
        assert_eq!(rate_enhancement(1.0, 0.0), 0.0);
        assert_relative_eq!(rate_enhancement(2.34, 0.34), 0.7956, epsilon = 1e-12);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [Metric::EtaFib, Metric::EtaFs, Metric::Rate] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Metric>(&json).unwrap(), m);
        }
        assert!("purcell".parse::<Metric>().is_err());
    }

    fn flat(lo: f64, hi: f64) -> Spectrum {
        Spectrum::new(vec![(lo, 3.0), (hi, 3.0)]).unwrap()
    }

    #[test]
    fn flat_spectrum_density() {
        let s = flat(600.0, 700.0);
        assert_relative_eq!(s.density(650.0), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn spectrum_rejects_bad_input() {
        assert!(Spectrum::new(vec![(700.0, 1.0), (600.0, 1.0)]).is_err());
        assert!(Spectrum::new(vec![(600.0, 1.0), (600.0, 1.0)]).is_err());
        assert!(Spectrum::new(vec![(600.0, 1.0), (700.0, -1.0)]).is_err());
        assert!(flat(500.0, 560.0).clipped(580.0, 750.0).is_err());
    }

    #[test]
    fn clipping_keeps_unit_area() {
        let s = Spectrum::new(vec![(550.0, 0.0), (600.0, 2.0), (650.0, 1.0), (800.0, 0.0)]).unwrap();
        let c = s.clipped(580.0, 750.0).unwrap();
        assert_eq!(c.support(), (580.0, 750.0));
        assert_relative_eq!(trapezoid(c.samples()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_metric_averages_to_itself() {
        let s = Spectrum::new(vec![(580.0, 0.1), (619.0, 5.0), (640.0, 1.0), (750.0, 0.2)]).unwrap();
        let curve: Vec<_> = wavelength_grid(580.0, 750.0, 18).into_iter().map(|l| (l, 0.37)).collect();
        assert_relative_eq!(broadband_average(&curve, &s).unwrap(), 0.37, epsilon = 1e-12);
    }

    #[test]
    fn narrow_spectrum_picks_out_the_line() {
        let s = Spectrum::new(vec![(618.9, 0.0), (619.0, 1.0), (619.1, 0.0)]).unwrap();
        let curve: Vec<_> = wavelength_grid(580.0, 750.0, 18).into_iter().map(|l| (l, (l / 100.0).sin())).collect();
        let expected = interpolate(&curve, 619.0).unwrap();
        assert_relative_eq!(broadband_average(&curve, &s).unwrap(), expected, epsilon = 1e-6);
    }

    #[test]
    fn coverage_gap_is_reported() {
        let s = flat(580.0, 750.0);
        let curve = vec![(600.0, 1.0), (700.0, 1.0)];
        match broadband_average(&curve, &s) {
            Err(MeritError::CoverageGap { missing }) => assert_eq!(missing, vec![(580.0, 600.0), (700.0, 750.0)]),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn average_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0.1f64..10.0) {
            let raw = vec![(580.0, 1.0), (600.0, 3.0), (619.0, 8.0), (700.0, 0.5), (750.0, 0.1)];
            let s1 = Spectrum::new(raw.clone()).unwrap();
            let s2 = Spectrum::new(raw.iter().map(|&(l, i)| (l, k * i)).collect()).unwrap();
            let grid = wavelength_grid(580.0, 750.0, 18);
            let z1: Vec<_> = grid.iter().map(|&l| (l, (l / 37.0).cos())).collect();
            let z2: Vec<_> = grid.iter().map(|&l| (l, l / 750.0)).collect();
            let mix: Vec<_> = z1.iter().zip(&z2).map(|(p, q)| (p.0, a * p.1 + b * q.1)).collect();
            let lhs = broadband_average(&mix, &s1).unwrap();
            let rhs = a * broadband_average(&z1, &s1).unwrap() + b * broadband_average(&z2, &s1).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            prop_assert!((broadband_average(&mix, &s2).unwrap() - lhs).abs() < 1e-12);
        }
    }

    fn design() -> (IncGeometry, DipoleSource) {
        (make_inc(635.0, 391.0, 1.0, 0.0, IndexSet::diamond_only()).unwrap(), DipoleSource::horizontal(507.0))
    }

    #[test]
    fn default_sweep_offsets() {
        assert_eq!(sweep_offsets(10.0, 5).unwrap(), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
        assert!(sweep_offsets(10.0, 4).is_err());
        assert!(sweep_offsets(0.0, 5).is_err());
    }

    #[test]
    fn flat_metric_scores_one() {
        let (g, d) = design();
        let params = SweepParameter::for_design(&g);
        let r = sensitivity_from_samples(Metric::EtaFib, &params, &sweep_offsets(10.0, 5).unwrap(), |_, _| Ok(0.6), &g, &d).unwrap();
        assert_eq!(r.score, 1.0);
        for c in &r.curves {
            assert!(c.samples.contains(&(c.parameter.nominal(&g, &d), 0.6)));
        }
    }

    #[test]
    fn tent_metric_matches_closed_form() {
        // ζ = ζ0 (1 - |Δp|/L): off-nominal offsets ±5, ±10 give the mean
        // 1 - (5 + 10)/(2L) for every parameter.
        let (g, d) = design();
        let l = 40.0;
        let params = SweepParameter::for_design(&g);
        let r = sensitivity_from_samples(
            Metric::EtaFib,
            &params,
            &sweep_offsets(10.0, 5).unwrap(),
            |_, o| Ok(0.5 * (1.0 - o.abs() / l)),
            &g,
            &d,
        )
        .unwrap();
        assert_relative_eq!(r.score, 1.0 - 15.0 / (2.0 * l), epsilon = 1e-15);
    }

    #[test]
    fn vanishing_precision_tends_to_one() {
        // Smooth surrogate in all four parameters.
        let (g, d) = design();
        let f = |p: SweepParameter, o: f64| {
            let w = match p {
                SweepParameter::H => 30.0,
                SweepParameter::Rt => 80.0,
                SweepParameter::Dz => 25.0,
                _ => 60.0,
            };
            Ok(0.7 * (-(o / w).powi(2)).exp() + 0.02 * (o / w).sin())
        };
        let params = SweepParameter::for_design(&g);
        let coarse = sensitivity_from_samples(Metric::EtaFib, &params, &sweep_offsets(10.0, 5).unwrap(), f, &g, &d).unwrap();
        let fine = sensitivity_from_samples(Metric::EtaFib, &params, &sweep_offsets(1.0, 5).unwrap(), f, &g, &d).unwrap();
        assert!((fine.score - 1.0).abs() < 1e-3);
        assert!((fine.score - 1.0).abs() < (coarse.score - 1.0).abs());
    }

    #[test]
    fn zero_nominal_is_undefined() {
        let (g, d) = design();
        let r = sensitivity_from_samples(Metric::Rate, &[SweepParameter::H], &[-1.0, 0.0, 1.0], |_, _| Ok(0.0), &g, &d);
        assert!(matches!(r, Err(MeritError::UndefinedScore)));
    }

    #[test]
    fn hybrid_sweeps_coating() {
        let g = make_inc(1462.0, 624.0, 1.0, 607.0, IndexSet::hybrid()).unwrap();
        assert!(SweepParameter::for_design(&g).contains(&SweepParameter::Coating));
        let (g2, _) = SweepParameter::Coating.apply(&g, &DipoleSource::horizontal(1295.0), -10.0);
        assert_eq!(g2.coating_thickness, 597.0);
    }

    #[test]
    fn optics_config_defaults() {
        let o: Optics = serde_json::from_str("{}").unwrap();
        assert_eq!(o, Optics::default());
        let o: Optics = serde_json::from_str(r#"{"na": 0.8, "magnification": {"policy": "fixed", "value": 7.5}}"#).unwrap();
        assert_eq!(o.magnification, MagnificationPolicy::Fixed { value: 7.5 });
        assert!(serde_json::from_str::<Optics>(r#"{"NA": 0.8}"#).is_err());
    }
}
