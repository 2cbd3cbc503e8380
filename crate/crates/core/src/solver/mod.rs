//! Dipole emission in a rasterized scene by 3D FDTD.
//!
//! The grid is aligned so that a node coincides with the emitter, and each
//! dipole component is injected as a two-point current on the pair of Yee
//! samples straddling it. Mirror planes through the emitter split a run into
//! one sub-run per dipole component whose fields are summed afterwards.
//!
//! All returned fields are per unit dipole moment, in units where
//! `c = ε0 = μ0 = 1` and lengths are in nm. Powers are therefore in nm⁻⁴ and
//! only their ratios are physical; a unit dipole in vacuum radiates
//! [`analytic_dipole_power`].

mod cpml;
mod dump;
mod fdtd;
mod monitor;
mod source;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{averaged_permittivity, dipole_components, DipoleSource, GeometryError, Scene};

pub use dump::FieldPlane;
pub use fdtd::Parity;
pub use monitor::{MonitorSurface, SurfacePatch};

use fdtd::Engine;
use monitor::{realize, BoxSpec, Field, GlobalSample, Layout, PatchLayout, Resolver};
use source::Pulse;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const CHECK_INTERVAL: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("resolution of {0} points per wavelength is below the minimum of 10")]
    Resolution(f64),
    #[error("padding of {padding} nm is below half a wavelength ({min} nm)")]
    Padding { padding: f64, min: f64 },
    #[error("Courant factor {0} outside (0, 1/sqrt(3)]")]
    Courant(f64),
    #[error("domain of {cells:.3e} cells exceeds the budget of {budget:.3e}")]
    CellBudget { cells: f64, budget: f64 },
    #[error("invalid setting: {0}")]
    Setting(String),
    #[error("monitor placement: {0}")]
    Monitor(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("fields diverged after {steps} steps")]
    Diverged { steps: usize },
    #[error("not converged after {steps} steps: residual energy {residual:.3e}, power drift {drift:.3e}")]
    Unconverged { steps: usize, residual: f64, drift: f64 },
}

/// Numerical settings of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Cells per wavelength in the densest material.
    pub points_per_wavelength: f64,
    /// Clearance between the structure and the absorbing layer.
    #[serde(rename = "padding_nm")]
    pub padding: f64,
    pub pml_cells: usize,
    pub courant: f64,
    pub cell_budget: f64,
    pub max_steps: usize,
    /// Stop once the field energy falls below this fraction of its peak.
    pub decay_threshold: f64,
    /// Relative spectral half-width of the source pulse.
    pub bandwidth: f64,
    /// Use mirror planes through the emitter where the scene allows.
    pub symmetry: bool,
    /// Supersamples per cell edge for permittivity averaging.
    pub subpixel: usize,
    /// Explicit cell size overriding `points_per_wavelength`.
    #[serde(rename = "cell_size_nm")]
    pub cell_size: Option<f64>,
    /// Half-size of the power-measuring box around the emitter (cells).
    pub source_box_cells: usize,
    /// Record the surface used by the far-field transform.
    pub farfield: bool,
    /// Additional closed boxes around the emitter (half-sizes in cells).
    pub extra_boxes: Vec<usize>,
    /// Record E on the `y = 0` plane.
    pub field_plane: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            points_per_wavelength: 18.0,
            padding: 400.0,
            pml_cells: 10,
            courant: 0.5,
            cell_budget: 5e7,
            max_steps: 100_000,
            decay_threshold: 1e-6,
            bandwidth: 0.1,
            symmetry: true,
            subpixel: 4,
            cell_size: None,
            source_box_cells: 2,
            farfield: true,
            extra_boxes: Vec::new(),
            field_plane: false,
        }
    }
}

impl SolverSettings {
    pub fn with_resolution(mut self, ppw: f64) -> Self {
        self.points_per_wavelength = ppw;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.points_per_wavelength >= 10.0) {
            return Err(SolverError::Resolution(self.points_per_wavelength));
        }
        if !(self.courant > 0.0 && self.courant <= 1.0 / 3f64.sqrt()) {
            return Err(SolverError::Courant(self.courant));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth < 1.0) {
            return Err(SolverError::Setting(format!("bandwidth {} outside (0, 1)", self.bandwidth)));
        }
        if self.subpixel == 0 {
            return Err(SolverError::Setting("subpixel must be at least 1".into()));
        }
        if self.source_box_cells == 0 {
            return Err(SolverError::Setting("source box must be at least one cell".into()));
        }
        if let Some(c) = self.cell_size {
            if !(c > 0.0) {
                return Err(SolverError::Setting(format!("cell size {c} nm must be positive")));
            }
        }
        Ok(())
    }
}

/// A rasterized scene ready for time stepping.
#[derive(Debug, Clone)]
pub struct SimulationDomain {
    pub scene: Scene,
    pub wavelength: f64,
    pub cell_size: f64,
    pub courant_factor: f64,
    pub pml_cells: usize,
    /// Position (nm) of global node `(0,0,0)`, which is the emitter.
    pub origin: [f64; 3],
    /// Inclusive global node range of the non-absorbing region per axis.
    pub interior: [[i64; 2]; 3],
    /// Full array size including absorbing layers.
    pub extents: [usize; 3],
    /// Relative permittivity at the Ex, Ey and Ez sample positions.
    pub permittivity: [Vec<f32>; 3],
    pub settings: SolverSettings,
    source_box: BoxSpec,
    ntff_box: Option<BoxSpec>,
    extra_boxes: Vec<BoxSpec>,
}

impl SimulationDomain {
    pub fn cell_count(&self) -> usize {
        self.extents.iter().product()
    }

    /// Global index of array index 0.
    fn full_offset(&self) -> [i64; 3] {
        [0, 1, 2].map(|a| self.interior[a][0] - self.pml_cells as i64)
    }

    /// Permittivity of the Yee sample `comp` at array index `(i, j, k)`.
    pub fn permittivity_at_index(&self, comp: usize, i: usize, j: usize, k: usize) -> f64 {
        self.permittivity[comp][(i * self.extents[1] + j) * self.extents[2] + k] as f64
    }

    /// Angular frequency in grid units (`c = 1`, unit cell).
    fn omega_grid(&self) -> f64 {
        2.0 * PI * self.cell_size / self.wavelength
    }

    /// Whether a monitor box stays inside the non-absorbing region.
    fn check_box(&self, b: &BoxSpec, name: &str) -> Result<(), SolverError> {
        for a in 0..3 {
            let [lo, hi] = self.interior[a];
            if b.lo[a] <= lo || b.hi[a] >= hi || b.lo[a] >= b.hi[a] {
                return Err(SolverError::Monitor(format!(
                    "{name} box spans [{}, {}] on axis {a}, outside the interior [{lo}, {hi}]",
                    b.lo[a], b.hi[a]
                )));
            }
        }
        Ok(())
    }
}

fn floor_i(x: f64) -> i64 {
    (x - 1e-9).floor() as i64
}

fn ceil_i(x: f64) -> i64 {
    (x + 1e-9).ceil() as i64
}

/// Rasterizes `scene` on a grid aligned to the emitter of `dipole`.
pub fn build_domain(scene: &Scene, dipole: &DipoleSource, settings: &SolverSettings) -> Result<SimulationDomain, SolverError> {
    settings.validate()?;
    dipole.validate()?;
    if let Scene::Cone(g) = scene {
        g.validate()?;
        dipole.validate_in(g)?;
    }
    let lambda = dipole.wavelength;
    let pad = settings.padding;
    if !(pad >= 0.5 * lambda) {
        return Err(SolverError::Padding { padding: pad, min: 0.5 * lambda });
    }
    let cell = settings.cell_size.unwrap_or(lambda / (scene.max_index() * settings.points_per_wavelength));
    let origin = dipole.position(scene);
    let r = scene.lateral_radius();
    let top = scene.top_z();
    let z_low = origin[2].min(0.0);
    let interior = [
        [floor_i((-r - pad - origin[0]) / cell), ceil_i((r + pad - origin[0]) / cell)],
        [floor_i((-r - pad - origin[1]) / cell), ceil_i((r + pad - origin[1]) / cell)],
        [floor_i((z_low - pad - origin[2]) / cell), ceil_i((top + pad - origin[2]) / cell)],
    ];
    let pml = settings.pml_cells;
    let extents = [0, 1, 2].map(|a| (interior[a][1] - interior[a][0] + 1) as usize + 2 * pml);
    let cells = extents.iter().map(|&n| n as f64).product::<f64>();
    if cells > settings.cell_budget {
        return Err(SolverError::CellBudget { cells, budget: settings.cell_budget });
    }

    let s = settings.source_box_cells as i64;
    let source_box = BoxSpec::cube(s);
    let ntff_box = settings.farfield.then(|| {
        let side = r + 0.5 * pad;
        let (z_lo, open_bottom) = if scene.has_substrate() {
            (ceil_i((0.75 * cell - origin[2]) / cell), true)
        } else {
            (floor_i((z_low - 0.5 * pad - origin[2]) / cell), false)
        };
        BoxSpec {
            lo: [floor_i((-side - origin[0]) / cell), floor_i((-side - origin[1]) / cell), z_lo],
            hi: [ceil_i((side - origin[0]) / cell), ceil_i((side - origin[1]) / cell), ceil_i((top + 0.5 * pad - origin[2]) / cell)],
            open_bottom,
        }
    });
    let extra_boxes: Vec<BoxSpec> = settings.extra_boxes.iter().map(|&h| BoxSpec::cube(h as i64)).collect();

    let mut domain = SimulationDomain {
        scene: *scene,
        wavelength: lambda,
        cell_size: cell,
        courant_factor: settings.courant,
        pml_cells: pml,
        origin,
        interior,
        extents,
        permittivity: Default::default(),
        settings: settings.clone(),
        source_box,
        ntff_box,
        extra_boxes,
    };
    domain.check_box(&source_box, "source")?;
    if let Some(b) = &ntff_box {
        domain.check_box(b, "far-field")?;
    }
    for b in &domain.extra_boxes {
        domain.check_box(b, "flux")?;
    }
    domain.permittivity = rasterize(&domain);
    Ok(domain)
}

fn rasterize(d: &SimulationDomain) -> [Vec<f32>; 3] {
    let [nx, ny, nz] = d.extents;
    let off = d.full_offset();
    let sub = d.settings.subpixel;
    [0, 1, 2].map(|c| {
        let mut eps = vec![0f32; nx * ny * nz];
        eps.par_chunks_mut(ny * nz).enumerate().for_each(|(i, slab)| {
            for j in 0..ny {
                for k in 0..nz {
                    let mut g = [(i as i64 + off[0]) as f64, (j as i64 + off[1]) as f64, (k as i64 + off[2]) as f64];
                    g[c] += 0.5;
                    let p = [0, 1, 2].map(|a| d.origin[a] + g[a] * d.cell_size);
                    slab[j * nz + k] = averaged_permittivity(&d.scene, p, d.cell_size, sub) as f32;
                }
            }
        });
        eps
    })
}

/// Run statistics; deterministic for a given input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub cell_size_nm: f64,
    pub extents: [usize; 3],
    /// Number of mirrored sub-runs.
    pub sub_runs: usize,
    /// Time steps summed over sub-runs.
    pub steps: usize,
    /// Final field energy relative to its peak (worst sub-run).
    pub residual: f64,
    /// Relative change of the emitted power over the last 10% of steps.
    pub power_drift: f64,
    /// Offset between the requested emitter position and the grid source.
    pub source_offset_nm: [f64; 3],
}

/// Frequency-domain result of a dipole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateFields {
    pub wavelength: f64,
    /// Optical frequency (Hz).
    pub frequency: f64,
    pub ambient_index: f64,
    /// Power through the closed box around the emitter.
    pub emitted_power: f64,
    /// Power delivered by the source current, an independent estimate.
    pub source_power: f64,
    pub source_surface: MonitorSurface,
    /// Box enclosing the structure for the far-field transform.
    pub farfield_surface: Option<MonitorSurface>,
    pub extra_surfaces: Vec<MonitorSurface>,
    /// Far-field phase reference: centre of the top facet.
    pub reference_point: [f64; 3],
    pub plane: Option<FieldPlane>,
    pub stats: RunStats,
}

impl SteadyStateFields {
    /// The same run with all fields multiplied by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        let p = c.norm_sqr();
        out.emitted_power *= p;
        out.source_power *= p;
        out.source_surface = self.source_surface.scaled(c);
        out.farfield_surface = self.farfield_surface.as_ref().map(|s| s.scaled(c));
        out.extra_surfaces = self.extra_surfaces.iter().map(|s| s.scaled(c)).collect();
        if let Some(pl) = &mut out.plane {
            pl.data.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v *= c));
        }
        out
    }
}

/// Power radiated by a time-harmonic dipole of moment `amplitude` in an
/// unbounded medium of index `index`, in the units of [`SteadyStateFields`].
pub fn analytic_dipole_power(wavelength: f64, index: f64, amplitude: f64) -> f64 {
    let w = 2.0 * PI / wavelength;
    index * w.powi(4) * amplitude * amplitude / (12.0 * PI)
}

struct Group {
    comps: Vec<usize>,
    mirror: [Option<Parity>; 2],
}

fn parity_groups(p: [f64; 3], sym: [bool; 2]) -> Vec<Group> {
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out: Vec<Group> = Vec::new();
    for c in 0..3 {
        if p[c].abs() <= 1e-12 * norm {
            continue;
        }
        let mirror = [0, 1].map(|a| sym[a].then_some(if c == a { Parity::Odd } else { Parity::Even }));
        match out.iter_mut().find(|g| g.mirror == mirror) {
            Some(g) => g.comps.push(c),
            None => out.push(Group { comps: vec![c], mirror }),
        }
    }
    out
}

struct GroupResult {
    values: Vec<Complex64>,
    steps: usize,
    residual: f64,
    drift: f64,
}

struct Probes {
    layout: Layout,
    source: Vec<PatchLayout>,
    ntff: Option<Vec<PatchLayout>>,
    extra: Vec<Vec<PatchLayout>>,
    /// Stencil samples and their current weights.
    stencil: Vec<(usize, f64)>,
    plane: Option<(Vec<usize>, [usize; 3], [i64; 3])>,
}

fn probes(d: &SimulationDomain, p: [f64; 3]) -> Probes {
    let mut layout = Layout::default();
    let source = layout.add_box(&d.source_box);
    let ntff = d.ntff_box.as_ref().map(|b| layout.add_box(b));
    let extra = d.extra_boxes.iter().map(|b| layout.add_box(b)).collect();
    let mut stencil = Vec::new();
    for (c, &pc) in p.iter().enumerate() {
        if pc == 0.0 {
            continue;
        }
        for s in [-1, 0] {
            let mut g = [0i64; 3];
            g[c] = s;
            stencil.push((layout.add(GlobalSample { field: Field::E, comp: c, g }), 0.5 * pc));
        }
    }
    let plane = d.settings.field_plane.then(|| {
        let [x0, x1] = d.interior[0];
        let [z0, z1] = d.interior[2];
        let mut ids = Vec::new();
        for i in x0..=x1 {
            for k in z0..=z1 {
                for c in 0..3 {
                    ids.push(layout.add(GlobalSample { field: Field::E, comp: c, g: [i, 0, k] }));
                }
            }
        }
        (ids, [(x1 - x0 + 1) as usize, 1, (z1 - z0 + 1) as usize], [x0, 0, z0])
    });
    Probes { layout, source, ntff, extra, stencil, plane }
}

fn patch_flux(patches: &[PatchLayout], value: impl Fn(usize) -> Complex64) -> f64 {
    let mut total = 0.0;
    for p in patches {
        let s = p.outward * monitor::levi(p.normal, p.e_comp, p.h_comp);
        let mut acc = 0.0;
        for ((&e, &[h0, h1]), w) in p.e_ids.iter().zip(&p.h_ids).zip(&p.weight) {
            let h = 0.5 * (value(h0) + value(h1));
            acc += w * (value(e) * h.conj()).re;
        }
        total += 0.5 * s * acc;
    }
    total
}

/// Relative change of the recorded power over the last 10% of steps.
fn power_drift(history: &[(usize, f64)]) -> f64 {
    let Some(&(n_end, p_end)) = history.last() else { return f64::INFINITY };
    let target = (0.9 * n_end as f64) as usize;
    match history.iter().rev().find(|(n, _)| *n <= target) {
        Some(&(_, p)) => ((p_end - p) / p_end).abs(),
        None => f64::INFINITY,
    }
}

fn run_group(d: &SimulationDomain, group: &Group, p: [f64; 3], probes: &Probes) -> Result<GroupResult, SolverError> {
    let pml = d.pml_cells;
    let full_off = d.full_offset();
    let mut offset = full_off;
    let mut dims = d.extents;
    let mut pml_faces = [[pml, pml]; 3];
    for a in 0..2 {
        if group.mirror[a].is_some() {
            offset[a] = 0;
            dims[a] = (d.interior[a][1] + 1) as usize + pml;
            pml_faces[a] = [0, pml];
        }
    }
    let dt = d.courant_factor;
    let coef = [0, 1, 2].map(|c| {
        let [nx, ny, nz] = dims;
        let mut out = vec![0f32; nx * ny * nz];
        let shift = [0, 1, 2].map(|a| (offset[a] - full_off[a]) as usize);
        out.par_chunks_mut(ny * nz).enumerate().for_each(|(i, slab)| {
            for j in 0..ny {
                let src = ((i + shift[0]) * d.extents[1] + j + shift[1]) * d.extents[2] + shift[2];
                for k in 0..nz {
                    slab[j * nz + k] = (dt / d.permittivity[c][src + k] as f64) as f32;
                }
            }
        });
        out
    });
    let omega = d.omega_grid();
    let mut eng = Engine::new(dims, dt, coef, pml_faces, group.mirror, omega);

    let resolver = Resolver { mirror: group.mirror, offset, dims };
    let mut uniq: [HashMap<(usize, usize), usize>; 2] = Default::default();
    let mut lists: [Vec<(usize, usize)>; 2] = Default::default();
    let mut map = Vec::with_capacity(probes.layout.samples.len());
    for s in &probes.layout.samples {
        let (flat, f) = resolver
            .resolve(s)
            .ok_or_else(|| SolverError::Monitor(format!("sample {s:?} outside the grid")))?;
        let fi = if s.field == Field::E { 0 } else { 1 };
        let key = (s.comp, flat);
        let next = lists[fi].len();
        let u = *uniq[fi].entry(key).or_insert(next);
        if u == next {
            lists[fi].push(key);
        }
        map.push((fi, u, f));
    }
    let mut acc_e = vec![Complex64::default(); lists[0].len()];
    let mut acc_h = vec![Complex64::default(); lists[1].len()];

    let mut sources = Vec::new();
    for &c in &group.comps {
        for s in [-1i64, 0] {
            let mut g = [0i64; 3];
            g[c] = s;
            if (0..2).any(|a| group.mirror[a].is_some() && g[a] < 0) {
                continue;
            }
            let (flat, _) = resolver
                .resolve(&GlobalSample { field: Field::E, comp: c, g })
                .ok_or_else(|| SolverError::Monitor("emitter outside the grid".into()))?;
            sources.push((c, flat, 0.5 * p[c]));
        }
    }

    let interior = [0, 1, 2].map(|a| {
        let lo = (d.interior[a][0] - offset[a]).max(0) as usize;
        (lo, (d.interior[a][1] - offset[a] + 1) as usize)
    });
    let pulse = Pulse::new(omega, d.settings.bandwidth);
    let mut j_acc = Complex64::default();
    let mut peak = 0f64;
    let mut residual = f64::INFINITY;
    let mut drift = f64::INFINITY;
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut steps = 0;
    let mut converged = false;

    for n in 0..d.settings.max_steps {
        eng.step_h();
        let th = (n as f64 + 0.5) * dt;
        let ph = Complex64::from_polar(dt, omega * th);
        for (a, &(c, idx)) in acc_h.iter_mut().zip(&lists[1]) {
            *a += ph * eng.h[c][idx] as f64;
        }
        eng.step_e();
        if th <= pulse.end() {
            let jv = pulse.current(th);
            for &(c, idx, w) in &sources {
                eng.inject(c, idx, (w * jv) as f32);
            }
            j_acc += ph * jv;
        }
        let te = (n as f64 + 1.0) * dt;
        let pe = Complex64::from_polar(dt, omega * te);
        for (a, &(c, idx)) in acc_e.iter_mut().zip(&lists[0]) {
            *a += pe * eng.e[c][idx] as f64;
        }
        steps = n + 1;
        if steps % CHECK_INTERVAL != 0 {
            continue;
        }
        let energy = eng.energy(interior);
        if !energy.is_finite() {
            return Err(SolverError::Diverged { steps });
        }
        peak = peak.max(energy);
        if te <= pulse.end() {
            continue;
        }
        let p_tilde = Complex64::i() * j_acc / omega;
        let value = |id: usize| {
            let (fi, u, f) = map[id];
            let a = if fi == 0 { acc_e[u] } else { acc_h[u] };
            a * f / p_tilde
        };
        history.push((steps, patch_flux(&probes.source, value)));
        residual = if peak > 0.0 { energy / peak } else { 0.0 };
        drift = power_drift(&history);
        if residual < d.settings.decay_threshold && drift < 1e-3 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolverError::Unconverged { steps, residual, drift });
    }
    log::debug!("sub-run {:?}: {steps} steps, residual {residual:.2e}, drift {drift:.2e}", group.mirror);
    let p_tilde = Complex64::i() * j_acc / omega;
    let values = map
        .iter()
        .map(|&(fi, u, f)| {
            let a = if fi == 0 { acc_e[u] } else { acc_h[u] };
            a * f / p_tilde
        })
        .collect();
    Ok(GroupResult { values, steps, residual, drift })
}

/// Time-steps the emitter of `dipole` in a prepared domain.
pub fn run_dipole(domain: &SimulationDomain, dipole: &DipoleSource) -> Result<SteadyStateFields, SolverError> {
    let pos = dipole.position(&domain.scene);
    if (0..3).any(|a| (pos[a] - domain.origin[a]).abs() > 1e-9 * domain.cell_size.max(1.0))
        || (dipole.wavelength - domain.wavelength).abs() > 1e-12 * domain.wavelength
    {
        return Err(SolverError::Setting("dipole does not match the domain it was built for".into()));
    }
    let p = dipole_components(dipole);
    let sym = [domain.settings.symmetry && domain.origin[0] == 0.0, domain.settings.symmetry && domain.origin[1] == 0.0];
    let groups = parity_groups(p, sym);
    if groups.is_empty() {
        return Err(SolverError::Setting("dipole has zero amplitude".into()));
    }
    let probes = probes(domain, p);
    let mut values = vec![Complex64::default(); probes.layout.samples.len()];
    let mut steps = 0;
    let mut residual = 0f64;
    let mut drift = 0f64;
    for g in &groups {
        let r = run_group(domain, g, p, &probes)?;
        for (v, x) in values.iter_mut().zip(&r.values) {
            *v += x;
        }
        steps += r.steps;
        residual = residual.max(r.residual);
        drift = drift.max(r.drift);
    }

    let cell = domain.cell_size;
    let field_scale = cell.powi(-3);
    let surface = |l: &[PatchLayout], closed: bool| MonitorSurface {
        patches: realize(l, &values, cell, domain.origin, field_scale),
        closed,
    };
    let source_surface = surface(&probes.source, true);
    let farfield_surface = probes.ntff.as_ref().map(|l| surface(l, !domain.ntff_box.unwrap().open_bottom));
    let extra_surfaces = probes.extra.iter().map(|l| surface(l, true)).collect();
    let omega = domain.omega_grid();
    let mut work = Complex64::default();
    for &(id, w) in &probes.stencil {
        let j = Complex64::new(0.0, -omega) * w;
        work += j.conj() * values[id];
    }
    let source_power = -0.5 * work.re * cell.powi(-4);
    let plane = probes.plane.as_ref().map(|(ids, dims, start)| FieldPlane {
        dims: *dims,
        cell_size: cell,
        origin: [0, 1, 2].map(|a| domain.origin[a] + start[a] as f64 * cell),
        wavelength: domain.wavelength,
        data: ids.chunks(3).map(|c| [0, 1, 2].map(|i| values[c[i]] * field_scale)).collect(),
    });
    let emitted_power = source_surface.flux();
    Ok(SteadyStateFields {
        wavelength: domain.wavelength,
        frequency: SPEED_OF_LIGHT / (domain.wavelength * 1e-9),
        ambient_index: domain.scene.ambient_index(),
        emitted_power,
        source_power,
        source_surface,
        farfield_surface,
        extra_surfaces,
        reference_point: [0.0, 0.0, domain.scene.top_z()],
        plane,
        stats: RunStats {
            cell_size_nm: cell,
            extents: domain.extents,
            sub_runs: groups.len(),
            steps,
            residual,
            power_drift: drift,
            source_offset_nm: [0.0; 3],
        },
    })
}

/// Builds the domain and runs the dipole in one call.
pub fn simulate(scene: &Scene, dipole: &DipoleSource, settings: &SolverSettings) -> Result<SteadyStateFields, SolverError> {
    let domain = build_domain(scene, dipole, settings)?;
    run_dipole(&domain, dipole)
}

/// Ratio of emitted power in a structure to the bulk reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurcellResult {
    pub factor: f64,
    pub structure_power: f64,
    pub bulk_power: f64,
}

/// Index of the bulk material that hosts the emitter.
pub fn host_index(scene: &Scene) -> f64 {
    match scene {
        Scene::Cone(g) => g.n_diamond,
        Scene::Homogeneous { index } => *index,
        Scene::FlatSubstrate { substrate_index, .. } => *substrate_index,
    }
}

fn bulk_cache() -> &'static Mutex<HashMap<String, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Power of `dipole` in an unbounded medium of `index` on a grid of the given
/// cell size, with the same stencil as a structure run. Results are cached.
pub fn bulk_power(index: f64, cell_size: f64, dipole: &DipoleSource, settings: &SolverSettings) -> Result<f64, SolverError> {
    let mut s = settings.clone();
    s.cell_size = Some(cell_size);
    s.farfield = false;
    s.field_plane = false;
    s.extra_boxes.clear();
    let bulk_dipole = DipoleSource { d_z: 0.0, d_x: 0.0, ..*dipole };
    let key = format!("{index:?}|{cell_size:?}|{bulk_dipole:?}|{s:?}");
    if let Some(&p) = bulk_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(p);
    }
    let p = simulate(&Scene::Homogeneous { index }, &bulk_dipole, &s)?.emitted_power;
    bulk_cache().lock().expect("cache poisoned").insert(key, p);
    Ok(p)
}

/// Purcell factor from an existing structure run.
pub fn purcell_from_fields(
    fields: &SteadyStateFields,
    scene: &Scene,
    dipole: &DipoleSource,
    settings: &SolverSettings,
) -> Result<PurcellResult, SolverError> {
    let bulk = bulk_power(host_index(scene), fields.stats.cell_size_nm, dipole, settings)?;
    Ok(PurcellResult { factor: fields.emitted_power / bulk, structure_power: fields.emitted_power, bulk_power: bulk })
}

/// Emitted power in the structure over that in bulk host material, both at
/// the same cell size and amplitude.
pub fn purcell_factor(scene: &Scene, dipole: &DipoleSource, settings: &SolverSettings) -> Result<PurcellResult, SolverError> {
    let mut s = settings.clone();
    s.farfield = false;
    let fields = simulate(scene, dipole, &s)?;
    purcell_from_fields(&fields, scene, dipole, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_inc, IndexSet};

    fn quick() -> SolverSettings {
        SolverSettings { points_per_wavelength: 10.0, padding: 320.0, farfield: false, ..Default::default() }
    }

    #[test]
    fn rejects_bad_settings() {
        let s = SolverSettings::default().with_resolution(5.0);
        let err = build_domain(&Scene::vacuum(), &DipoleSource::horizontal(0.0), &s).unwrap_err();
        assert!(matches!(err, SolverError::Resolution(_)));
        let s = SolverSettings { padding: 200.0, ..Default::default() };
        assert!(matches!(
            build_domain(&Scene::vacuum(), &DipoleSource::horizontal(0.0), &s),
            Err(SolverError::Padding { .. })
        ));
        let s = SolverSettings { cell_budget: 1e3, ..Default::default() };
        assert!(matches!(
            build_domain(&Scene::vacuum(), &DipoleSource::horizontal(0.0), &s),
            Err(SolverError::CellBudget { .. })
        ));
    }

    #[test]
    fn empty_scene_is_uniform() {
        let d = build_domain(&Scene::vacuum(), &DipoleSource::horizontal(0.0), &quick()).unwrap();
        for c in 0..3 {
            assert!(d.permittivity[c].iter().all(|&e| e == 1.0));
        }
    }

    #[test]
    fn cone_is_rasterized_with_smoothing() {
        let g = make_inc(635.0, 391.0, 1.0, 0.0, IndexSet::diamond_only()).unwrap();
        let d = build_domain(&Scene::Cone(g), &DipoleSource::horizontal(507.0), &quick()).unwrap();
        let eps = &d.permittivity[2];
        let (lo, hi) = eps.iter().fold((f32::MAX, f32::MIN), |(a, b), &e| (a.min(e), b.max(e)));
        assert_eq!(lo, 1.0);
        assert!((hi as f64 - 2.41f64.powi(2)).abs() < 1e-5);
        assert!(eps.iter().any(|&e| e > 1.01 && e < 5.8));
    }

    #[test]
    fn parity_groups_split_components() {
        let g = parity_groups([0.8, 0.0, 0.6], [true, true]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].mirror, [Some(Parity::Odd), Some(Parity::Even)]);
        assert_eq!(g[1].mirror, [Some(Parity::Even), Some(Parity::Even)]);
        let g = parity_groups([0.8, 0.0, 0.6], [false, true]);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].comps, vec![0, 2]);
    }

    #[test]
    fn vacuum_dipole_power_matches_analytic() {
        let f = simulate(&Scene::vacuum(), &DipoleSource::horizontal(0.0), &quick()).unwrap();
        let p0 = analytic_dipole_power(619.0, 1.0, 1.0);
        assert!((f.emitted_power / p0 - 1.0).abs() < 0.05, "{} vs {p0}", f.emitted_power);
        assert!((f.source_power / p0 - 1.0).abs() < 0.05, "{} vs {p0}", f.source_power);
    }

    #[test]
    fn mirrored_and_full_runs_agree() {
        let dip = DipoleSource { polar_tilt: 30.0, ..DipoleSource::horizontal(0.0) };
        let a = simulate(&Scene::vacuum(), &dip, &quick()).unwrap();
        let b = simulate(&Scene::vacuum(), &dip, &SolverSettings { symmetry: false, ..quick() }).unwrap();
        assert_eq!(a.stats.sub_runs, 2);
        assert_eq!(b.stats.sub_runs, 1);
        assert!((a.emitted_power / b.emitted_power - 1.0).abs() < 1e-4);
    }
}
