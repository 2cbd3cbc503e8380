//! Frequency-domain monitors on closed (or bottom-open) boxes.
//!
//! Monitors are laid out in global grid coordinates, where node `(0,0,0)` is
//! the emitter and every component of the full, unmirrored grid has an integer
//! address. Each mirrored sub-run resolves these addresses to its own arrays,
//! so the surface data of all sub-runs can simply be summed.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fdtd::Parity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Field {
    E,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct GlobalSample {
    pub field: Field,
    pub comp: usize,
    pub g: [i64; 3],
}

/// Whether `field`/`comp` sits at a half-integer position along `axis`.
pub(crate) fn is_half(field: Field, comp: usize, axis: usize) -> bool {
    match field {
        Field::E => comp == axis,
        Field::H => comp != axis,
    }
}

/// Inclusive node bounds of a monitor box in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BoxSpec {
    pub lo: [i64; 3],
    pub hi: [i64; 3],
    pub open_bottom: bool,
}

impl BoxSpec {
    pub fn cube(half: i64) -> Self {
        Self { lo: [-half; 3], hi: [half; 3], open_bottom: false }
    }
}

/// One face (or one staggered sub-lattice of a face) of a monitor box, in
/// grid units. Elements are row-major `[v][u]`.
#[derive(Debug, Clone)]
pub(crate) struct PatchLayout {
    pub normal: usize,
    pub outward: f64,
    pub plane: f64,
    pub e_comp: usize,
    pub h_comp: usize,
    pub u_axis: usize,
    pub v_axis: usize,
    pub u0: f64,
    pub v0: f64,
    pub nu: usize,
    pub nv: usize,
    pub weight: Vec<f64>,
    pub e_ids: Vec<usize>,
    pub h_ids: Vec<[usize; 2]>,
}

/// All global samples a run must record, deduplicated.
#[derive(Debug, Default, Clone)]
pub(crate) struct Layout {
    pub samples: Vec<GlobalSample>,
    index: HashMap<GlobalSample, usize>,
}

impl Layout {
    pub fn add(&mut self, s: GlobalSample) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.samples.push(s);
        self.index.insert(s, self.samples.len() - 1);
        self.samples.len() - 1
    }

    /// Lays out the faces of `b`. Each face yields two patches: tangential
    /// `E_b` paired with `H_c`, and `E_c` paired with `H_b`, where `(a, b, c)`
    /// is cyclic and `a` is the face normal. H is averaged across the face.
    pub fn add_box(&mut self, b: &BoxSpec) -> Vec<PatchLayout> {
        let mut out = Vec::new();
        for a in 0..3 {
            for outward in [-1.0, 1.0] {
                if a == 2 && outward < 0.0 && b.open_bottom {
                    continue;
                }
                let p = if outward < 0.0 { b.lo[a] } else { b.hi[a] };
                let (ub, uc) = ((a + 1) % 3, (a + 2) % 3);
                for (e_comp, h_comp) in [(ub, uc), (uc, ub)] {
                    // The E component is staggered along its own axis.
                    let half_u = e_comp == ub;
                    let (u_lo, u_hi) = (b.lo[ub], b.hi[ub]);
                    let (v_lo, v_hi) = (b.lo[uc], b.hi[uc]);
                    let nu = if half_u { u_hi - u_lo } else { u_hi - u_lo + 1 } as usize;
                    let nv = if half_u { v_hi - v_lo + 1 } else { v_hi - v_lo } as usize;
                    let mut patch = PatchLayout {
                        normal: a,
                        outward,
                        plane: p as f64,
                        e_comp,
                        h_comp,
                        u_axis: ub,
                        v_axis: uc,
                        u0: u_lo as f64 + if half_u { 0.5 } else { 0.0 },
                        v0: v_lo as f64 + if half_u { 0.0 } else { 0.5 },
                        nu,
                        nv,
                        weight: Vec::with_capacity(nu * nv),
                        e_ids: Vec::with_capacity(nu * nv),
                        h_ids: Vec::with_capacity(nu * nv),
                    };
                    for iv in 0..nv {
                        let v = v_lo + iv as i64;
                        for iu in 0..nu {
                            let u = u_lo + iu as i64;
                            // Node-aligned directions use trapezoid weights.
                            let w = if half_u {
                                if v == v_lo || v == v_hi { 0.5 } else { 1.0 }
                            } else if u == u_lo || u == u_hi {
                                0.5
                            } else {
                                1.0
                            };
                            let mut g = [0i64; 3];
                            g[a] = p;
                            g[ub] = u;
                            g[uc] = v;
                            let e = self.add(GlobalSample { field: Field::E, comp: e_comp, g });
                            let mut g0 = g;
                            g0[a] = p - 1;
                            let h0 = self.add(GlobalSample { field: Field::H, comp: h_comp, g: g0 });
                            let h1 = self.add(GlobalSample { field: Field::H, comp: h_comp, g });
                            patch.weight.push(w);
                            patch.e_ids.push(e);
                            patch.h_ids.push([h0, h1]);
                        }
                    }
                    out.push(patch);
                }
            }
        }
        out
    }
}

/// Maps global samples onto the arrays of one (possibly mirrored) sub-run.
pub(crate) struct Resolver {
    pub mirror: [Option<Parity>; 2],
    /// Global index of array index 0 along each axis.
    pub offset: [i64; 3],
    pub dims: [usize; 3],
}

impl Resolver {
    /// Array flat index and the factor relating the global sample to it.
    pub fn resolve(&self, s: &GlobalSample) -> Option<(usize, f64)> {
        let mut g = s.g;
        let mut f = 1.0;
        for axis in 0..2 {
            let Some(par) = self.mirror[axis] else { continue };
            if g[axis] >= 0 {
                continue;
            }
            g[axis] = if is_half(s.field, s.comp, axis) { -g[axis] - 1 } else { -g[axis] };
            let normal = if s.comp == axis { -1.0 } else { 1.0 };
            f *= match s.field {
                Field::E => par.sign() * normal,
                Field::H => -par.sign() * normal,
            };
        }
        let mut flat = 0usize;
        for a in 0..3 {
            let i = g[a] - self.offset[a];
            if i < 0 || i as usize >= self.dims[a] {
                return None;
            }
            flat = flat * self.dims[a] + i as usize;
        }
        Some((flat, f))
    }
}

/// Field samples on one monitor patch, in nm and per unit dipole moment.
///
/// Elements are row-major `[v][u]`; the element at `(iu, iv)` sits at
/// `plane` along `normal`, `u0 + iu·step` along `u_axis` and `v0 + iv·step`
/// along `v_axis`. `e` is the tangential E component `e_comp` and `h` the
/// tangential H component `h_comp` at the same point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePatch {
    pub normal: usize,
    pub outward: f64,
    pub plane: f64,
    pub e_comp: usize,
    pub h_comp: usize,
    pub u_axis: usize,
    pub v_axis: usize,
    pub u0: f64,
    pub v0: f64,
    pub step: f64,
    pub nu: usize,
    pub nv: usize,
    /// Quadrature area per element (nm²).
    pub area: Vec<f64>,
    pub e: Vec<Complex64>,
    pub h: Vec<Complex64>,
}

/// Levi-Civita symbol for distinct axes.
pub(crate) fn levi(a: usize, b: usize, c: usize) -> f64 {
    if (a + 1) % 3 == b && (b + 1) % 3 == c {
        1.0
    } else {
        -1.0
    }
}

impl SurfacePatch {
    pub fn position(&self, iu: usize, iv: usize) -> [f64; 3] {
        let mut p = [0.0; 3];
        p[self.normal] = self.plane;
        p[self.u_axis] = self.u0 + iu as f64 * self.step;
        p[self.v_axis] = self.v0 + iv as f64 * self.step;
        p
    }

    /// Time-averaged outward Poynting flux.
    pub fn flux(&self) -> f64 {
        let s = self.outward * levi(self.normal, self.e_comp, self.h_comp);
        let mut acc = 0.0;
        for ((e, h), w) in self.e.iter().zip(&self.h).zip(&self.area) {
            acc += w * (e * h.conj()).re;
        }
        0.5 * s * acc
    }
}

/// A monitor surface around the emitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSurface {
    pub patches: Vec<SurfacePatch>,
    /// False when the bottom face is omitted.
    pub closed: bool,
}

impl MonitorSurface {
    /// Net outward power through the surface.
    pub fn flux(&self) -> f64 {
        self.patches.iter().map(SurfacePatch::flux).sum()
    }

    /// Multiplies every field sample by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for p in &mut out.patches {
            p.e.iter_mut().for_each(|v| *v *= c);
            p.h.iter_mut().for_each(|v| *v *= c);
        }
        out
    }
}

/// Builds output patches from per-sample values (grid units) and the cell size.
pub(crate) fn realize(
    layouts: &[PatchLayout],
    values: &[Complex64],
    cell: f64,
    origin: [f64; 3],
    field_scale: f64,
) -> Vec<SurfacePatch> {
    layouts
        .iter()
        .map(|l| {
            let e = l.e_ids.iter().map(|&i| values[i] * field_scale).collect();
            let h = l.h_ids.iter().map(|&[a, b]| 0.5 * (values[a] + values[b]) * field_scale).collect();
            SurfacePatch {
                normal: l.normal,
                outward: l.outward,
                plane: origin[l.normal] + l.plane * cell,
                e_comp: l.e_comp,
                h_comp: l.h_comp,
                u_axis: l.u_axis,
                v_axis: l.v_axis,
                u0: origin[l.u_axis] + l.u0 * cell,
                v0: origin[l.v_axis] + l.v0 * cell,
                step: cell,
                nu: l.nu,
                nv: l.nv,
                area: l.weight.iter().map(|w| w * cell * cell).collect(),
                e,
                h,
            }
        })
        .collect()
}
