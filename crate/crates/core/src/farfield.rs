//! Near-to-far-field transform and free-space collection efficiency.
//!
//! Tangential fields on the monitor box are replaced by equivalent currents
//! `J = n × H` and `M = -n × E`, whose radiation vectors
//!
//! ```text
//! N = Σ J exp(-ik r̂·r') dA      L = Σ M exp(-ik r̂·r') dA
//! ```
//!
//! give the far-zone amplitudes `E_θ = ik/4π (L_φ + η N_θ)` and
//! `E_φ = -ik/4π (L_θ - η N_φ)`, with `k` and `η` of the ambient medium and
//! the phase referenced to the top-facet centre. Amplitudes are `r·E`, so the
//! radiant intensity is `|E|² / 2η`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::solver::{MonitorSurface, SteadyStateFields, SurfacePatch};

#[derive(Debug, thiserror::Error)]
pub enum FarFieldError {
    #[error("run has no far-field monitor; enable `farfield` in the solver settings")]
    MissingSurface,
    #[error("invalid angular grid: {0}")]
    Grid(String),
    #[error("numerical aperture {0} outside (0, 1]")]
    Aperture(f64),
    #[error("far field carries no emitted power")]
    NoPower,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Uniform samples of polar and azimuthal angle (radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl AngularGrid {
    /// `n_phi` azimuths over `[0, 2π]` and `n_theta` polar angles over
    /// `[0, π/2]`, both endpoints included.
    pub fn hemisphere(n_phi: usize, n_theta: usize) -> Self {
        let lin = |n: usize, hi: f64| (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect();
        Self { theta: lin(n_theta, PI / 2.0), phi: lin(n_phi, 2.0 * PI) }
    }

    pub fn check(&self) -> Result<(), FarFieldError> {
        if self.theta.len() < 2 || self.phi.len() < 3 {
            return Err(FarFieldError::Grid("need at least 2 polar and 3 azimuthal samples".into()));
        }
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !inc(&self.theta) || !inc(&self.phi) {
            return Err(FarFieldError::Grid("angles must be strictly increasing".into()));
        }
        if self.theta[0] != 0.0 || (self.phi[0] != 0.0 || (self.phi[self.phi.len() - 1] - 2.0 * PI).abs() > 1e-12) {
            return Err(FarFieldError::Grid("polar angles start at 0 and azimuths cover [0, 2π]".into()));
        }
        Ok(())
    }
}

impl Default for AngularGrid {
    fn default() -> Self {
        Self::hemisphere(181, 91)
    }
}

/// Numerical aperture of the first collection lens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionOptics {
    pub numerical_aperture: f64,
}

impl CollectionOptics {
    pub fn new(numerical_aperture: f64) -> Result<Self, FarFieldError> {
        if !(numerical_aperture > 0.0 && numerical_aperture <= 1.0) {
            return Err(FarFieldError::Aperture(numerical_aperture));
        }
        Ok(Self { numerical_aperture })
    }

    /// Acceptance half-angle in a medium of index `n`.
    pub fn theta_max(&self, n: f64) -> f64 {
        (self.numerical_aperture / n).min(1.0).asin()
    }
}

/// Far-zone field over the upper hemisphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub wavelength: f64,
    pub ambient_index: f64,
    pub grid: AngularGrid,
    /// `r·E_θ`, row-major `[theta][phi]`.
    pub e_theta: Vec<Complex64>,
    pub e_phi: Vec<Complex64>,
    /// Total power emitted by the source, in the same units as the intensity.
    pub total_emitted_power: f64,
}

impl FarField {
    /// Samples a prescribed field `(E_θ, E_φ)` on `grid`.
    pub fn from_fn(
        wavelength: f64,
        ambient_index: f64,
        grid: AngularGrid,
        total_emitted_power: f64,
        f: impl Fn(f64, f64) -> (Complex64, Complex64),
    ) -> Self {
        let mut e_theta = Vec::with_capacity(grid.theta.len() * grid.phi.len());
        let mut e_phi = Vec::with_capacity(e_theta.capacity());
        for &t in &grid.theta {
            for &p in &grid.phi {
                let (a, b) = f(t, p);
                e_theta.push(a);
                e_phi.push(b);
            }
        }
        Self { wavelength, ambient_index, grid, e_theta, e_phi, total_emitted_power }
    }

    pub fn n_theta(&self) -> usize {
        self.grid.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.grid.phi.len()
    }

    /// Radiant intensity `dP/dΩ` at sample `(it, ip)`.
    pub fn intensity(&self, it: usize, ip: usize) -> f64 {
        let i = it * self.n_phi() + ip;
        0.5 * self.ambient_index * (self.e_theta[i].norm_sqr() + self.e_phi[i].norm_sqr())
    }

    /// Power radiated into polar angles `θ ≤ theta_max`.
    pub fn power_within(&self, theta_max: f64) -> f64 {
        let rows: Vec<f64> = (0..self.n_theta())
            .map(|it| {
                let v: Vec<f64> = (0..self.n_phi()).map(|ip| self.intensity(it, ip)).collect();
                trapezoid(&self.grid.phi, &v) * self.grid.theta[it].sin()
            })
            .collect();
        integrate_to(&self.grid.theta, &rows, theta_max)
    }

    pub fn hemisphere_power(&self) -> f64 {
        self.power_within(PI / 2.0)
    }

    /// Multiplies every amplitude by `c`; the emitted power scales by `|c|²`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.e_theta.iter_mut().for_each(|v| *v *= c);
        out.e_phi.iter_mut().for_each(|v| *v *= c);
        out.total_emitted_power *= c.norm_sqr();
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<(), FarFieldError> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        w.write_record(["theta_deg", "phi_deg", "re_e_theta", "im_e_theta", "re_e_phi", "im_e_phi"])?;
        for (it, t) in self.grid.theta.iter().enumerate() {
            for (ip, p) in self.grid.phi.iter().enumerate() {
                let i = it * self.n_phi() + ip;
                w.write_record(&[
                    format!("{}", t.to_degrees()),
                    format!("{}", p.to_degrees()),
                    format!("{:e}", self.e_theta[i].re),
                    format!("{:e}", self.e_theta[i].im),
                    format!("{:e}", self.e_phi[i].re),
                    format!("{:e}", self.e_phi[i].im),
                ])?;
            }
        }
        w.flush()?;
        let sidecar = serde_json::json!({
            "schema_version": crate::SCHEMA_VERSION,
            "code_version": crate::CODE_VERSION,
            "wavelength_nm": self.wavelength,
            "ambient_index": self.ambient_index,
            "total_emitted_power": self.total_emitted_power,
            "hemisphere_power": self.hemisphere_power(),
            "n_theta": self.n_theta(),
            "n_phi": self.n_phi(),
            "units": "amplitudes are r*E per unit dipole moment; intensity = n|E|^2/2",
        });
        let mut f = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
        serde_json::to_writer_pretty(&mut f, &sidecar)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Trapezoidal rule on samples `y(x)`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Trapezoidal integral of `y(x)` from `x[0]` to `upper`, interpolating
/// linearly inside the last partial interval.
pub fn integrate_to(x: &[f64], y: &[f64], upper: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() - 1 {
        let (x0, x1) = (x[i], x[i + 1]);
        if upper <= x0 {
            break;
        }
        if upper >= x1 {
            acc += 0.5 * (x1 - x0) * (y[i] + y[i + 1]);
        } else {
            let yu = y[i] + (y[i + 1] - y[i]) * (upper - x0) / (x1 - x0);
            acc += 0.5 * (upper - x0) * (y[i] + yu);
            break;
        }
    }
    acc
}

/// Transform evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// Direct summation over every surface element.
    Exact,
    /// Row-wise sums tabulated in direction cosine and interpolated.
    Fast,
}

/// Far field from the run's monitor box on the default grid.
pub fn near_to_far(fields: &SteadyStateFields) -> Result<FarField, FarFieldError> {
    near_to_far_on(fields, &AngularGrid::default(), Transform::Fast)
}

pub fn near_to_far_on(fields: &SteadyStateFields, grid: &AngularGrid, method: Transform) -> Result<FarField, FarFieldError> {
    let surface = fields.farfield_surface.as_ref().ok_or(FarFieldError::MissingSurface)?;
    let total = fields.emitted_power;
    if !(total > 0.0) {
        return Err(FarFieldError::NoPower);
    }
    transform_surface(surface, fields.wavelength, fields.ambient_index, fields.reference_point, total, grid, method)
}

/// Transforms an arbitrary monitor surface.
pub fn transform_surface(
    surface: &MonitorSurface,
    wavelength: f64,
    ambient_index: f64,
    reference: [f64; 3],
    total_emitted_power: f64,
    grid: &AngularGrid,
    method: Transform,
) -> Result<FarField, FarFieldError> {
    grid.check()?;
    let k = 2.0 * PI * ambient_index / wavelength;
    let eta = 1.0 / ambient_index;
    let dirs: Vec<[f64; 3]> = grid
        .theta
        .iter()
        .flat_map(|&t| grid.phi.iter().map(move |&p| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]))
        .collect();
    let mut n_vec = vec![[Complex64::default(); 3]; dirs.len()];
    let mut l_vec = vec![[Complex64::default(); 3]; dirs.len()];
    for patch in &surface.patches {
        let (nj, lm) = match method {
            Transform::Exact => radiate_exact(patch, k, reference, &dirs),
            Transform::Fast => radiate_fast(patch, k, reference, &dirs),
        };
        for (d, (a, b)) in nj.iter().zip(&lm).enumerate() {
            n_vec[d][patch.e_comp] += a;
            l_vec[d][patch.h_comp] += b;
        }
    }
    let pre = Complex64::new(0.0, k / (4.0 * PI));
    let mut e_theta = Vec::with_capacity(dirs.len());
    let mut e_phi = Vec::with_capacity(dirs.len());
    let np = grid.phi.len();
    for (d, (nv, lv)) in n_vec.iter().zip(&l_vec).enumerate() {
        let (t, p) = (grid.theta[d / np], grid.phi[d % np]);
        let (ct, st, cp, sp) = (t.cos(), t.sin(), p.cos(), p.sin());
        let theta_of = |v: &[Complex64; 3]| v[0] * ct * cp + v[1] * ct * sp - v[2] * st;
        let phi_of = |v: &[Complex64; 3]| -v[0] * sp + v[1] * cp;
        e_theta.push(pre * (phi_of(lv) + eta * theta_of(nv)));
        e_phi.push(-pre * (theta_of(lv) - eta * phi_of(nv)));
    }
    Ok(FarField { wavelength, ambient_index, grid: grid.clone(), e_theta, e_phi, total_emitted_power })
}

/// Sign relating the patch samples to the equivalent currents: the electric
/// current lies along `e_comp` and equals `σ h`, the magnetic one lies along
/// `h_comp` and equals `σ e`.
fn current_sign(p: &SurfacePatch) -> f64 {
    let levi = if (p.normal + 1) % 3 == p.h_comp { 1.0 } else { -1.0 };
    p.outward * levi
}

fn radiate_exact(p: &SurfacePatch, k: f64, reference: [f64; 3], dirs: &[[f64; 3]]) -> (Vec<Complex64>, Vec<Complex64>) {
    let s = current_sign(p);
    let mut nj = vec![Complex64::default(); dirs.len()];
    let mut lm = vec![Complex64::default(); dirs.len()];
    for (d, r) in dirs.iter().enumerate() {
        let (mut a, mut b) = (Complex64::default(), Complex64::default());
        for iv in 0..p.nv {
            for iu in 0..p.nu {
                let i = iv * p.nu + iu;
                let pos = p.position(iu, iv);
                let phase = -k * (0..3).map(|c| r[c] * (pos[c] - reference[c])).sum::<f64>();
                let w = Complex64::from_polar(p.area[i] * s, phase);
                a += w * p.h[i];
                b += w * p.e[i];
            }
        }
        nj[d] = a;
        lm[d] = b;
    }
    (nj, lm)
}

/// 4-point Lagrange weights at fractional offset `t ∈ [0, 1)` from node 1.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn radiate_fast(p: &SurfacePatch, k: f64, reference: [f64; 3], dirs: &[[f64; 3]]) -> (Vec<Complex64>, Vec<Complex64>) {
    let s = current_sign(p);
    let (nu, nv) = (p.nu, p.nv);
    let uc = p.u0 + 0.5 * (nu - 1) as f64 * p.step;
    let half = 0.5 * (nu - 1) as f64 * p.step;
    // Tabulate G_v(ρ) = Σ_u f e^{-ikρ(x_u - x_c)} for ρ ∈ [-1, 1].
    let h = 0.15 / (k * half + 1.0);
    let m = (2.0 / h).ceil() as usize;
    let h = 2.0 / m as f64;
    let nodes = m + 1 + 4;
    let rho = |q: usize| -1.0 + (q as f64 - 2.0) * h;
    let mut g_j = vec![Complex64::default(); nv * nodes];
    let mut g_m = vec![Complex64::default(); nv * nodes];
    for q in 0..nodes {
        let r = rho(q);
        let step = Complex64::from_polar(1.0, -k * r * p.step);
        let start = Complex64::from_polar(1.0, k * r * half);
        for iv in 0..nv {
            let row = iv * nu;
            let (mut a, mut b) = (Complex64::default(), Complex64::default());
            let mut ph = start;
            for iu in 0..nu {
                let w = ph * p.area[row + iu];
                a += w * p.h[row + iu];
                b += w * p.e[row + iu];
                ph *= step;
            }
            g_j[iv * nodes + q] = a * s;
            g_m[iv * nodes + q] = b * s;
        }
    }
    let mut nj = vec![Complex64::default(); dirs.len()];
    let mut lm = vec![Complex64::default(); dirs.len()];
    for (d, r) in dirs.iter().enumerate() {
        let (ru, rv, rn) = (r[p.u_axis], r[p.v_axis], r[p.normal]);
        let x = (ru + 1.0) / h + 2.0;
        let q0 = (x.floor() as usize).clamp(1, nodes - 3);
        let w = cubic_weights(x - q0 as f64);
        let base = Complex64::from_polar(
            1.0,
            -k * (ru * (uc - reference[p.u_axis]) + rn * (p.plane - reference[p.normal]) + rv * (p.v0 - reference[p.v_axis])),
        );
        let step = Complex64::from_polar(1.0, -k * rv * p.step);
        let (mut a, mut b) = (Complex64::default(), Complex64::default());
        let mut ph = base;
        for iv in 0..nv {
            let o = iv * nodes + q0 - 1;
            let gj = g_j[o] * w[0] + g_j[o + 1] * w[1] + g_j[o + 2] * w[2] + g_j[o + 3] * w[3];
            let gm = g_m[o] * w[0] + g_m[o + 1] * w[1] + g_m[o + 2] * w[2] + g_m[o + 3] * w[3];
            a += gj * ph;
            b += gm * ph;
            ph *= step;
        }
        nj[d] = a;
        lm[d] = b;
    }
    (nj, lm)
}

/// Fraction of the total emitted power collected within the optics' NA.
pub fn eta_fs(farfield: &FarField, optics: &CollectionOptics) -> Result<f64, FarFieldError> {
    if !(farfield.total_emitted_power > 0.0) {
        return Err(FarFieldError::NoPower);
    }
    let t = optics.theta_max(farfield.ambient_index);
    Ok(farfield.power_within(t) / farfield.total_emitted_power)
}

/// Radiant intensity of a unit dipole `p` in an unbounded medium, for tests
/// and synthetic inputs: `E = k² (r̂ × p) × r̂ / (4π n²)` in `r·E` units.
pub fn dipole_far_field(wavelength: f64, index: f64, p: [f64; 3], theta: f64, phi: f64) -> (Complex64, Complex64) {
    let k = 2.0 * PI * index / wavelength;
    let amp = k * k / (4.0 * PI * index * index);
    let (ct, st, cp, sp) = (theta.cos(), theta.sin(), phi.cos(), phi.sin());
    let th = [ct * cp, ct * sp, -st];
    let ph = [-sp, cp, 0.0];
    let dot = |a: [f64; 3]| a[0] * p[0] + a[1] * p[1] + a[2] * p[2];
    (Complex64::new(amp * dot(th), 0.0), Complex64::new(amp * dot(ph), 0.0))
}
