//! Step-index fiber fundamental mode and imaging-system overlap.
//!
//! The mode is the weakly guiding LP01 solution. Its far field on the fiber
//! side of the imaging system is mapped to the emitter side by an ideal
//! aplanatic system of magnification `M` (`sinθ' = sinθ / M`), including the
//! energy-conserving apodization `√(cosθ / (M² cosθ'))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::farfield::{CollectionOptics, FarField};
use crate::special::{bessel_j0, bessel_j1, bessel_k0, bessel_k1};

/// First zero of `J0`, the LP11 cutoff.
pub const SINGLE_MODE_CUTOFF: f64 = 2.404_825_557_695_773;

#[derive(Debug, thiserror::Error)]
pub enum FiberError {
    #[error("no guided mode: n_core {n_core} must exceed n_clad {n_clad}")]
    NoGuidedMode { n_core: f64, n_clad: f64 },
    #[error("invalid fiber parameter: {0}")]
    Spec(String),
    #[error("dispersion relation has no root in the LP01 interval")]
    NoRoot,
    #[error("far field at {farfield} nm does not match the mode at {mode} nm")]
    WavelengthMismatch { farfield: f64, mode: f64 },
    #[error("invalid magnification: {0}")]
    Magnification(String),
    #[error("far field carries no emitted power")]
    NoPower,
}

/// Step-index fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    #[serde(rename = "core_um", default = "default_core")]
    pub core_diameter: f64,
    #[serde(default = "default_n_core")]
    pub n_core: f64,
    #[serde(default = "default_n_clad")]
    pub n_clad: f64,
    /// Operating wavelength (nm); set from the emitter, not the config.
    #[serde(skip, default = "default_wavelength")]
    pub wavelength: f64,
}

fn default_core() -> f64 {
    3.5
}
fn default_n_core() -> f64 {
    1.4632
}
fn default_n_clad() -> f64 {
    1.4574
}
fn default_wavelength() -> f64 {
    619.0
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self { core_diameter: default_core(), n_core: default_n_core(), n_clad: default_n_clad(), wavelength: default_wavelength() }
    }
}

impl FiberSpec {
    /// The 3.5 µm visible single-mode fiber used throughout.
    pub fn visible_single_mode(wavelength: f64) -> Self {
        Self { wavelength, ..Self::default() }
    }

    pub fn with_wavelength(mut self, wavelength: f64) -> Self {
        self.wavelength = wavelength;
        self
    }

    pub fn core_radius(&self) -> f64 {
        0.5 * self.core_diameter
    }

    pub fn v_number(&self) -> f64 {
        let na2 = self.n_core * self.n_core - self.n_clad * self.n_clad;
        PI * self.core_diameter / (self.wavelength * 1e-3) * na2.max(0.0).sqrt()
    }

    pub fn validate(&self) -> Result<(), FiberError> {
        if !(self.core_diameter > 0.0) {
            return Err(FiberError::Spec(format!("core diameter {} µm must be positive", self.core_diameter)));
        }
        if !(self.n_clad >= 1.0) {
            return Err(FiberError::Spec(format!("cladding index {} below 1", self.n_clad)));
        }
        if !(self.wavelength > 0.0) {
            return Err(FiberError::Spec(format!("wavelength {} nm must be positive", self.wavelength)));
        }
        if !(self.n_core > self.n_clad) {
            return Err(FiberError::NoGuidedMode { n_core: self.n_core, n_clad: self.n_clad });
        }
        Ok(())
    }
}

/// LP01 mode of a [`FiberSpec`], normalized to unit power `∬|ψ|² dA = 1`
/// with lengths in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberMode {
    pub spec: FiberSpec,
    pub v: f64,
    pub u: f64,
    pub w: f64,
    /// Propagation constant (1/µm).
    pub beta: f64,
    pub single_mode: bool,
    amplitude: f64,
    /// `∫ |E'|² dΩ'` of the fiber-side far field over the full hemisphere.
    image_norm: f64,
}

/// LP01 eigenvalue equation `u J1(u)/J0(u) - w K1(w)/K0(w)` with `w² = V² - u²`.
pub fn dispersion_residual(u: f64, v: f64) -> f64 {
    let w = (v * v - u * u).sqrt();
    u * bessel_j1(u) / bessel_j0(u) - w * bessel_k1(w) / bessel_k0(w)
}

/// Solves the LP01 eigenvalue problem by bisection.
pub fn solve_mode(spec: &FiberSpec) -> Result<FiberMode, FiberError> {
    spec.validate()?;
    let v = spec.v_number();
    let single_mode = v < SINGLE_MODE_CUTOFF;
    if !single_mode {
        log::warn!("fiber V = {v:.3} exceeds {SINGLE_MODE_CUTOFF:.3}; higher-order modes are guided");
    }
    let hi0 = v.min(SINGLE_MODE_CUTOFF);
    let (mut lo, mut hi) = (1e-9 * hi0, hi0 * (1.0 - 1e-12));
    let f_lo = dispersion_residual(lo, v);
    let f_hi = dispersion_residual(hi, v);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(FiberError::NoRoot);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dispersion_residual(mid, v) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    let u = 0.5 * (lo + hi);
    let w = (v * v - u * u).sqrt();
    let a = spec.core_radius();
    let k0 = 2.0 * PI / (spec.wavelength * 1e-3);
    let beta = ((k0 * spec.n_core).powi(2) - (u / a).powi(2)).sqrt();
    let (j0, j1, kk0, kk1) = (bessel_j0(u), bessel_j1(u), bessel_k0(w), bessel_k1(w));
    let power = PI * a * a * ((j1 / j0).powi(2) + (kk1 / kk0).powi(2));
    let mut mode = FiberMode { spec: *spec, v, u, w, beta, single_mode, amplitude: 1.0 / power.sqrt(), image_norm: 0.0 };
    mode.image_norm = mode.compute_image_norm();
    Ok(mode)
}

/// Polarization of the launched fiber mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Y,
}

impl FiberMode {
    /// Normalized transverse field at radius `r` (µm).
    pub fn profile(&self, r: f64) -> f64 {
        let a = self.spec.core_radius();
        let x = r / a;
        if x < 1.0 {
            self.amplitude * bessel_j0(self.u * x) / bessel_j0(self.u)
        } else {
            self.amplitude * bessel_k0(self.w * x) / bessel_k0(self.w)
        }
    }

    /// `∬ |ψ|² dA` by Simpson's rule with `n` radial intervals per core
    /// radius, out to 12 core radii.
    pub fn power_numeric(&self, n: usize) -> f64 {
        self.overlap_numeric(self, n)
    }

    /// `∬ ψ₁ ψ₂ dA` of two co-centred modes on a radial grid.
    pub fn overlap_numeric(&self, other: &FiberMode, n: usize) -> f64 {
        let a = self.spec.core_radius().max(other.spec.core_radius());
        let span = 12.0 * a;
        let m = 12 * n;
        let h = span / m as f64;
        simpson(|r| self.profile(r) * other.profile(r) * 2.0 * PI * r, h, m)
    }

    /// 2D Fourier transform `∬ ψ e^{-i q·r} dA` at spatial frequency `q` (1/µm).
    pub fn angular_spectrum(&self, q: f64) -> f64 {
        let a = self.spec.core_radius();
        let (uu, ww) = (self.u / a, self.w / a);
        let (j0u, j1u) = (bessel_j0(self.u), bessel_j1(self.u));
        let (k0w, k1w) = (bessel_k0(self.w), bessel_k1(self.w));
        let (j0q, j1q) = (bessel_j0(q * a), bessel_j1(q * a));
        let inner = if (uu - q).abs() < 1e-7 * uu {
            0.5 * a * a * (j0u * j0u + j1u * j1u)
        } else {
            a * (uu * j1u * j0q - q * j0u * j1q) / (uu * uu - q * q)
        };
        let outer = a * (ww * k1w * j0q - q * k0w * j1q) / (ww * ww + q * q);
        2.0 * PI * self.amplitude * (inner / j0u + outer / k0w)
    }

    /// The same transform by direct radial quadrature, for cross-checks.
    pub fn angular_spectrum_numeric(&self, q: f64, n: usize) -> f64 {
        let a = self.spec.core_radius();
        let span = 20.0 * a;
        let m = 20 * n;
        let h = span / m as f64;
        2.0 * PI * simpson(|r| self.profile(r) * bessel_j0(q * r) * r, h, m)
    }

    fn k_image(&self) -> f64 {
        2.0 * PI / (self.spec.wavelength * 1e-3)
    }

    /// Fiber-side far-field amplitude profile at polar angle `θ'`.
    pub fn image_amplitude(&self, theta_img: f64) -> f64 {
        self.angular_spectrum(self.k_image() * theta_img.sin())
    }

    fn compute_image_norm(&self) -> f64 {
        // ∫|E'|² dΩ' = π ∫ A² (1 + cos²θ') sinθ' dθ' over the hemisphere.
        let n = 4000;
        let h = 0.5 * PI / n as f64;
        let f = |t: f64| self.image_amplitude(t).powi(2) * (1.0 + t.cos().powi(2)) * t.sin();
        let mut acc = 0.5 * (f(0.0) + f(0.5 * PI));
        for i in 1..n {
            acc += f(i as f64 * h);
        }
        PI * acc * h
    }

    /// Mode field mapped to the emitter side at `(θ, φ)` for magnification
    /// `m`, as `(E_θ, E_φ)`. Zero where no fiber-side ray exists.
    pub fn object_field(&self, theta: f64, phi: f64, m: f64, pol: Polarization) -> (f64, f64) {
        self.object_row(theta, m).map_or((0.0, 0.0), |(a, ci)| polarize(a, ci, phi, pol))
    }

    /// Apodized amplitude and `cosθ'` for object-side angle `θ`.
    fn object_row(&self, theta: f64, m: f64) -> Option<(f64, f64)> {
        let s = theta.sin() / m;
        if s >= 1.0 {
            return None;
        }
        let t_img = s.asin();
        let ci = t_img.cos();
        let apod = (theta.cos() / (m * m * ci)).sqrt();
        Some((self.image_amplitude(t_img) * apod, ci))
    }
}

fn polarize(a: f64, ci: f64, phi: f64, pol: Polarization) -> (f64, f64) {
    let (cp, sp) = (phi.cos(), phi.sin());
    match pol {
        Polarization::X => (a * cp, -a * ci * sp),
        Polarization::Y => (a * sp, a * ci * cp),
    }
}

/// Composite Simpson rule on `[0, n·h]`, `n` even, dropping the `f(0)` term
/// (every integrand here carries a factor `r`).
fn simpson(f: impl Fn(f64) -> f64, h: f64, n: usize) -> f64 {
    let mut acc = f(n as f64 * h);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

impl FiberMode {
}

/// Ideal two-lens imaging onto the fiber facet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingSystem {
    pub collection_na: f64,
    pub magnification: f64,
}

impl ImagingSystem {
    pub fn new(collection_na: f64, magnification: f64) -> Result<Self, FiberError> {
        CollectionOptics::new(collection_na).map_err(|e| FiberError::Magnification(e.to_string()))?;
        if !(magnification >= collection_na) {
            return Err(FiberError::Magnification(format!(
                "M = {magnification} below the collection NA {collection_na}; image-side angles would be complex"
            )));
        }
        Ok(Self { collection_na, magnification })
    }
}

/// Coupling into both launch polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberCoupling {
    pub eta_x: f64,
    pub eta_y: f64,
}

impl FiberCoupling {
    pub fn best(&self) -> (f64, Polarization) {
        if self.eta_y > self.eta_x {
            (self.eta_y, Polarization::Y)
        } else {
            (self.eta_x, Polarization::X)
        }
    }
}

fn check_wavelength(ff: &FarField, mode: &FiberMode) -> Result<(), FiberError> {
    if (ff.wavelength - mode.spec.wavelength).abs() > 1e-9 * mode.spec.wavelength {
        return Err(FiberError::WavelengthMismatch { farfield: ff.wavelength, mode: mode.spec.wavelength });
    }
    if !(ff.total_emitted_power > 0.0) {
        return Err(FiberError::NoPower);
    }
    Ok(())
}

/// Trapezoidal integral over `θ ≤ θmax` (partial last interval linear) of
/// row values already integrated over φ and weighted by `sinθ`.
fn cone_integral(theta: &[f64], rows: &[Complex64], upper: f64) -> Complex64 {
    let re: Vec<f64> = rows.iter().map(|c| c.re).collect();
    let im: Vec<f64> = rows.iter().map(|c| c.im).collect();
    Complex64::new(crate::farfield::integrate_to(theta, &re, upper), crate::farfield::integrate_to(theta, &im, upper))
}

fn overlap(ff: &FarField, optics: &ImagingSystem, mode: &FiberMode, pol: Polarization) -> f64 {
    let t_max = CollectionOptics { numerical_aperture: optics.collection_na }.theta_max(ff.ambient_index);
    let np = ff.n_phi();
    let phi = &ff.grid.phi;
    let mut rows = Vec::with_capacity(ff.n_theta());
    let mut theta = Vec::with_capacity(ff.n_theta());
    for (it, &t) in ff.grid.theta.iter().enumerate() {
        theta.push(t);
        let row = mode.object_row(t, optics.magnification);
        let integrand: Vec<Complex64> = (0..np)
            .map(|ip| {
                let Some((a, ci)) = row else { return Complex64::default() };
                let (mt, mp) = polarize(a, ci, phi[ip], pol);
                let i = it * np + ip;
                ff.e_theta[i].conj() * mt + ff.e_phi[i].conj() * mp
            })
            .collect();
        let re: Vec<f64> = integrand.iter().map(|c| c.re).collect();
        let im: Vec<f64> = integrand.iter().map(|c| c.im).collect();
        let sum = Complex64::new(crate::farfield::trapezoid(phi, &re), crate::farfield::trapezoid(phi, &im));
        rows.push(sum * t.sin());
        if t >= t_max {
            break;
        }
    }
    let ov = cone_integral(&theta, &rows, t_max);
    // |⟨E, Ê⟩|² / (2η P) with Ê normalized over the full fiber-side hemisphere.
    ov.norm_sqr() * ff.ambient_index / (2.0 * mode.image_norm * ff.total_emitted_power)
}

/// Fraction of the total emitted power coupled into the fiber mode, for
/// each launch polarization.
pub fn eta_fib(ff: &FarField, optics: &ImagingSystem, mode: &FiberMode) -> Result<FiberCoupling, FiberError> {
    check_wavelength(ff, mode)?;
    Ok(FiberCoupling { eta_x: overlap(ff, optics, mode, Polarization::X), eta_y: overlap(ff, optics, mode, Polarization::Y) })
}

/// Result of the magnification search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnificationChoice {
    pub magnification: f64,
    pub eta_fib: f64,
    pub polarization: Polarization,
    /// Coupling for both polarizations at the chosen magnification.
    pub coupling: FiberCoupling,
    /// The optimum sits at an end of the search range.
    pub at_boundary: bool,
}

pub const DEFAULT_MAGNIFICATION_RANGE: (f64, f64) = (1.0, 100.0);

/// Maximizes coupling over `M` in `range` for each polarization and returns
/// the better one. A log-spaced scan brackets the maximum, which a
/// golden-section search on `log M` then refines.
pub fn optimal_magnification(
    ff: &FarField,
    collection_na: f64,
    mode: &FiberMode,
    range: (f64, f64),
) -> Result<MagnificationChoice, FiberError> {
    check_wavelength(ff, mode)?;
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(FiberError::Magnification(format!("empty search range [{lo}, {hi}]")));
    }
    ImagingSystem::new(collection_na, lo)?;
    let mut best: Option<MagnificationChoice> = None;
    for pol in [Polarization::X, Polarization::Y] {
        let eta = |log_m: f64| overlap(ff, &ImagingSystem { collection_na, magnification: log_m.exp() }, mode, pol);
        let (a, b) = (lo.ln(), hi.ln());
        let n = 25;
        let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| eta(x)).collect();
        let imax = (0..n).fold(0, |m, i| if ys[i] > ys[m] { i } else { m });
        let at_boundary = imax == 0 || imax == n - 1;
        let (mut l, mut r) = (xs[imax.saturating_sub(1)], xs[(imax + 1).min(n - 1)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = r - g * (r - l);
        let mut x2 = l + g * (r - l);
        let (mut f1, mut f2) = (eta(x1), eta(x2));
        while r - l > 1e-5 {
            if f1 < f2 {
                l = x1;
                x1 = x2;
                f1 = f2;
                x2 = l + g * (r - l);
                f2 = eta(x2);
            } else {
                r = x2;
                x2 = x1;
                f2 = f1;
                x1 = r - g * (r - l);
                f1 = eta(x1);
            }
        }
        let (mut x, mut y) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
        if ys[imax] > y {
            x = xs[imax];
            y = ys[imax];
        }
        let m = x.exp();
        if best.map_or(true, |c| y > c.eta_fib) {
            let coupling = eta_fib(ff, &ImagingSystem { collection_na, magnification: m }, mode)?;
            best = Some(MagnificationChoice { magnification: m, eta_fib: y, polarization: pol, coupling, at_boundary });
        }
    }
    let choice = best.expect("two polarizations evaluated");
    if choice.at_boundary {
        log::warn!("optimal magnification {:.3} lies at the search boundary", choice.magnification);
    }
    Ok(choice)
}
