//! Yee-lattice update kernels.
//!
//! Units inside the engine: lengths in cells, `c = ε0 = μ0 = 1`, so the
//! time step equals the Courant number. Arrays are `nx × ny × nz` with `z`
//! contiguous; array index `(i, j, k)` holds
//!
//! | field | position |
//! |-------|----------|
//! | Ex | (i+½, j, k) |
//! | Ey | (i, j+½, k) |
//! | Ez | (i, j, k+½) |
//! | Hx | (i, j+½, k+½) |
//! | Hy | (i+½, j, k+½) |
//! | Hz | (i+½, j+½, k) |
//!
//! Tangential E on the outer faces is held at zero (PEC behind the CPML).
//! The low `x` and `y` faces may instead be mirror planes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cpml::{AxisProfile, CpmlParams};

/// Behaviour of E under a mirror plane: `E(Mr) = parity · M E(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// Tangential E vanishes on the plane (electric wall).
    Odd,
    /// Tangential H vanishes on the plane (magnetic wall).
    Even,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Odd => -1.0,
            Parity::Even => 1.0,
        }
    }
}

/// Half-open index range along each axis.
pub(crate) type Ranges = [(usize, usize); 3];

pub(crate) struct Engine {
    pub dims: [usize; 3],
    pub dt: f32,
    /// `dt / ε` at the Ex, Ey, Ez positions.
    pub coef: [Vec<f32>; 3],
    /// Mirror planes at array index 0 of x and y.
    pub mirror: [Option<Parity>; 2],
    pub e: [Vec<f32>; 3],
    pub h: [Vec<f32>; 3],
    profiles: [AxisProfile; 3],
    /// Auxiliary CPML fields indexed `[component][derivative axis]`.
    psi_e: [[Vec<f32>; 3]; 3],
    psi_h: [[Vec<f32>; 3]; 3],
}

#[inline(always)]
fn curl_h(out: &mut [f32], a1: &[f32], a0: &[f32], b1: &[f32], b0: &[f32], dt: f32) {
    let n = out.len();
    let (a1, a0, b1, b0) = (&a1[..n], &a0[..n], &b1[..n], &b0[..n]);
    for k in 0..n {
        out[k] -= dt * ((a1[k] - a0[k]) - (b1[k] - b0[k]));
    }
}

/// `out += coef ((a1 - sa·a0) - (b1 - sb·b0))`; a mirror neighbour is passed
/// as the current slice with sign -1.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn curl_e(out: &mut [f32], coef: &[f32], a1: &[f32], a0: &[f32], sa: f32, b1: &[f32], b0: &[f32], sb: f32) {
    let n = out.len();
    let (coef, a1, a0, b1, b0) = (&coef[..n], &a1[..n], &a0[..n], &b1[..n], &b0[..n]);
    for k in 0..n {
        out[k] += coef[k] * ((a1[k] - sa * a0[k]) - (b1[k] - sb * b0[k]));
    }
}

impl Engine {
    pub fn new(
        dims: [usize; 3],
        dt: f64,
        coef: [Vec<f32>; 3],
        pml: [[usize; 2]; 3],
        mirror: [Option<Parity>; 2],
        omega: f64,
    ) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        let params = CpmlParams::standard(omega);
        let profiles = [0, 1, 2].map(|a| AxisProfile::new(dims[a], pml[a][0], pml[a][1], dt, params));
        let mut psi_e: [[Vec<f32>; 3]; 3] = Default::default();
        let mut psi_h: [[Vec<f32>; 3]; 3] = Default::default();
        for c in 0..3 {
            for a in 0..3 {
                if a == c || profiles[a].slab_len() == 0 {
                    continue;
                }
                let len = n / dims[a] * profiles[a].slab_len();
                psi_e[c][a] = vec![0.0; len];
                psi_h[c][a] = vec![0.0; len];
            }
        }
        Self {
            dims,
            dt: dt as f32,
            coef,
            mirror,
            e: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            h: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            profiles,
            psi_e,
            psi_h,
        }
    }

    fn pmc(&self, axis: usize) -> bool {
        axis < 2 && self.mirror[axis] == Some(Parity::Even)
    }

    /// Array positions where E component `c` is time-stepped.
    pub fn e_ranges(&self, c: usize) -> Ranges {
        let mut r = [(0, 0); 3];
        for (a, slot) in r.iter_mut().enumerate() {
            let n = self.dims[a];
            *slot = if a == c || self.pmc(a) { (0, n - 1) } else { (1, n - 1) };
        }
        r
    }

    /// Array positions where H component `c` is time-stepped.
    fn h_ranges(&self, c: usize) -> Ranges {
        let mut r = [(0, 0); 3];
        for (a, slot) in r.iter_mut().enumerate() {
            let n = self.dims[a];
            *slot = if a == c { (0, n) } else { (0, n - 1) };
        }
        r
    }

    /// Advances H by one step from the current E.
    pub fn step_h(&mut self) {
        let [nx, ny, nz] = self.dims;
        let sx = ny * nz;
        let dt = self.dt;
        let [ex, ey, ez] = &self.e;
        let [hx, hy, hz] = &mut self.h;
        hx.par_chunks_mut(sx)
            .zip(hy.par_chunks_mut(sx))
            .zip(hz.par_chunks_mut(sx))
            .enumerate()
            .for_each(|(i, ((hx, hy), hz))| {
                for j in 0..ny {
                    let r = j * nz;
                    let g = i * sx + r;
                    if j + 1 < ny {
                        // Hx -= dt (dEz/dy - dEy/dz)
                        curl_h(&mut hx[r..r + nz - 1], &ez[g + nz..], &ez[g..], &ey[g + 1..], &ey[g..], dt);
                    }
                    if i + 1 < nx {
                        // Hy -= dt (dEx/dz - dEz/dx)
                        curl_h(&mut hy[r..r + nz - 1], &ex[g + 1..], &ex[g..], &ez[g + sx..], &ez[g..], dt);
                        if j + 1 < ny {
                            // Hz -= dt (dEy/dx - dEx/dy)
                            curl_h(&mut hz[r..r + nz], &ey[g + sx..], &ey[g..], &ex[g + nz..], &ex[g..], dt);
                        }
                    }
                }
            });
        self.cpml_h();
    }

    /// Advances E by one step from the current H (sources are added afterwards).
    pub fn step_e(&mut self) {
        let [nx, ny, nz] = self.dims;
        let sx = ny * nz;
        let x_pmc = self.pmc(0);
        let y_pmc = self.pmc(1);
        let [hx, hy, hz] = &self.h;
        let [cx, cy, cz] = &self.coef;
        let [ex, ey, ez] = &mut self.e;
        ex.par_chunks_mut(sx)
            .zip(ey.par_chunks_mut(sx))
            .zip(ez.par_chunks_mut(sx))
            .enumerate()
            .for_each(|(i, ((ex, ey), ez))| {
                let i_ok = i + 1 < nx && (i > 0 || x_pmc);
                for j in 0..ny {
                    let r = j * nz;
                    let g = i * sx + r;
                    let j_ok = j + 1 < ny && (j > 0 || y_pmc);
                    // Ex += c (dHz/dy - dHy/dz), k in 1..nz-1
                    if i + 1 < nx && j_ok {
                        let (hz0, sa) = if j == 0 { (&hz[g + 1..], -1.0) } else { (&hz[g - nz + 1..], 1.0) };
                        curl_e(&mut ex[r + 1..r + nz - 1], &cx[g + 1..], &hz[g + 1..], hz0, sa, &hy[g + 1..], &hy[g..], 1.0);
                    }
                    // Ey += c (dHx/dz - dHz/dx), k in 1..nz-1
                    if i_ok && j + 1 < ny {
                        let (hz0, sb) = if i == 0 { (&hz[g + 1..], -1.0) } else { (&hz[g - sx + 1..], 1.0) };
                        curl_e(&mut ey[r + 1..r + nz - 1], &cy[g + 1..], &hx[g + 1..], &hx[g..], 1.0, &hz[g + 1..], hz0, sb);
                    }
                    // Ez += c (dHy/dx - dHx/dy), k in 0..nz-1
                    if i_ok && j_ok {
                        let (hy0, sa) = if i == 0 { (&hy[g..], -1.0) } else { (&hy[g - sx..], 1.0) };
                        let (hx0, sb) = if j == 0 { (&hx[g..], -1.0) } else { (&hx[g - nz..], 1.0) };
                        curl_e(&mut ez[r..r + nz - 1], &cz[g..], &hy[g..], hy0, sa, &hx[g..], hx0, sb);
                    }
                }
            });
        self.cpml_e();
    }

    /// Adds a soft current source `J` (cell units) to one E sample.
    #[inline]
    pub fn inject(&mut self, component: usize, index: usize, current: f32) {
        let c = self.coef[component][index];
        self.e[component][index] -= c * current;
    }

    fn cpml_h(&mut self) {
        let dt = self.dt;
        for c in 0..3 {
            for a in 0..3 {
                if a == c || self.psi_h[c][a].is_empty() {
                    continue;
                }
                let t = 3 - a - c;
                // H_c -= dt(... ); the term along (c+1)%3 enters with +.
                let sign = if a == (c + 1) % 3 { -dt } else { dt };
                let ranges = self.h_ranges(c);
                let psi = std::mem::take(&mut self.psi_h[c][a]);
                let mut psi = psi;
                cpml_correct(
                    &mut self.h[c],
                    &self.e[t],
                    &mut psi,
                    None,
                    sign,
                    a,
                    true,
                    ranges,
                    &self.profiles[a],
                    self.dims,
                );
                self.psi_h[c][a] = psi;
            }
        }
    }

    fn cpml_e(&mut self) {
        for c in 0..3 {
            for a in 0..3 {
                if a == c || self.psi_e[c][a].is_empty() {
                    continue;
                }
                let t = 3 - a - c;
                let sign = if a == (c + 1) % 3 { 1.0 } else { -1.0 };
                let ranges = self.e_ranges(c);
                let mut psi = std::mem::take(&mut self.psi_e[c][a]);
                cpml_correct(
                    &mut self.e[c],
                    &self.h[t],
                    &mut psi,
                    Some(&self.coef[c]),
                    sign,
                    a,
                    false,
                    ranges,
                    &self.profiles[a],
                    self.dims,
                );
                self.psi_e[c][a] = psi;
            }
        }
    }

    /// Electromagnetic energy (up to a factor ½) inside `ranges`, summed in a
    /// fixed order.
    pub fn energy(&self, ranges: Ranges) -> f64 {
        let [_, ny, nz] = self.dims;
        let sx = ny * nz;
        let dt = self.dt as f64;
        let partial: Vec<f64> = (ranges[0].0..ranges[0].1)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0f64;
                for j in ranges[1].0..ranges[1].1 {
                    let g = i * sx + j * nz;
                    for k in ranges[2].0..ranges[2].1 {
                        let q = g + k;
                        for c in 0..3 {
                            let e = self.e[c][q] as f64;
                            let h = self.h[c][q] as f64;
                            let coef = self.coef[c][q] as f64;
                            acc += dt / coef * e * e + h * h;
                        }
                    }
                }
                acc
            })
            .collect();
        partial.iter().sum()
    }
}

/// Applies the CPML correction for the derivative along `axis` to `field`.
///
/// H updates use forward differences at half positions; E updates backward
/// differences at nodes.
#[allow(clippy::too_many_arguments)]
fn cpml_correct(
    field: &mut [f32],
    src: &[f32],
    psi: &mut [f32],
    coef: Option<&[f32]>,
    sign: f32,
    axis: usize,
    forward: bool,
    ranges: Ranges,
    prof: &AxisProfile,
    dims: [usize; 3],
) {
    let strides = [dims[1] * dims[2], dims[2], 1];
    let st = strides[axis];
    let mut pdims = dims;
    pdims[axis] = prof.slab_len();
    let pstrides = [pdims[1] * pdims[2], pdims[2], 1];
    let (b_arr, c_arr, k_arr) = if forward {
        (&prof.b_half, &prof.c_half, &prof.kinv_half)
    } else {
        (&prof.b_node, &prof.c_node, &prof.kinv_node)
    };
    let inner = |ia: usize| (b_arr[ia], c_arr[ia], k_arr[ia] - 1.0);
    for (s0, s1) in prof.slabs() {
        let lo = s0.max(ranges[axis].0);
        let hi = s1.min(ranges[axis].1);
        if lo >= hi {
            continue;
        }
        let mut r = ranges;
        r[axis] = (lo, hi);
        let (k0, k1) = r[2];
        for i in r[0].0..r[0].1 {
            let pi = if axis == 0 { prof.local(i) } else { i };
            for j in r[1].0..r[1].1 {
                let pj = if axis == 1 { prof.local(j) } else { j };
                let base = i * strides[0] + j * strides[1];
                let pbase = pi * pstrides[0] + pj * pstrides[1];
                if axis == 2 {
                    for k in k0..k1 {
                        let (b, c, km) = inner(k);
                        let idx = base + k;
                        let pidx = pbase + prof.local(k);
                        let d = if forward { src[idx + st] - src[idx] } else { src[idx] - src[idx - st] };
                        let p = b * psi[pidx] + c * d;
                        psi[pidx] = p;
                        field[idx] += sign * coef.map_or(1.0, |cf| cf[idx]) * (p + km * d);
                    }
                    continue;
                }
                let (b, c, km) = inner(if axis == 0 { i } else { j });
                let n = k1 - k0;
                let f = &mut field[base + k0..base + k1];
                let ps = &mut psi[pbase + k0..pbase + k1];
                let (s1, s0) = if forward {
                    (&src[base + k0 + st..base + k1 + st], &src[base + k0..base + k1])
                } else {
                    (&src[base + k0..base + k1], &src[base + k0 - st..base + k1 - st])
                };
                match coef {
                    Some(cf) => {
                        let cf = &cf[base + k0..base + k1];
                        for k in 0..n {
                            let d = s1[k] - s0[k];
                            let p = b * ps[k] + c * d;
                            ps[k] = p;
                            f[k] += sign * cf[k] * (p + km * d);
                        }
                    }
                    None => {
                        for k in 0..n {
                            let d = s1[k] - s0[k];
                            let p = b * ps[k] + c * d;
                            ps[k] = p;
                            f[k] += sign * (p + km * d);
                        }
                    }
                }
            }
        }
    }
}

