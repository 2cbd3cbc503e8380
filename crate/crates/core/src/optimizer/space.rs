//! Box-bounded search spaces with linear constraints, and Latin hypercube
//! sampling inside them.

use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::OptimizerError;
use crate::geometry::{DipoleSource, IncGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// `Σ coeffs[i]·x[i] ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub bound: f64,
}

impl LinearConstraint {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.bound - self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub dims: Vec<Dimension>,
    #[serde(default)]
    pub constraints: Vec<LinearConstraint>,
}

impl ParameterSpace {
    pub fn new(dims: Vec<Dimension>, constraints: Vec<LinearConstraint>) -> Result<Self, OptimizerError> {
        let s = Self { dims, constraints };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.dims.is_empty() {
            return Err(OptimizerError::Space("no dimensions".into()));
        }
        for d in &self.dims {
            if !(d.lo.is_finite() && d.hi.is_finite() && d.hi > d.lo) {
                return Err(OptimizerError::Space(format!("bounds of {} must be finite with lo < hi, got [{}, {}]", d.name, d.lo, d.hi)));
            }
        }
        for c in &self.constraints {
            if c.coeffs.len() != self.dim() {
                return Err(OptimizerError::Space(format!("constraint has {} coefficients for {} dimensions", c.coeffs.len(), self.dim())));
            }
        }
        // A coarse grid probe is enough to reject obviously empty regions.
        let n = 9usize;
        let total = n.pow(self.dim().min(6) as u32);
        let feasible = (0..total).any(|mut idx| {
            let x: Vec<f64> = (0..self.dim())
                .map(|_| {
                    let t = (idx % n) as f64 / (n - 1) as f64;
                    idx /= n;
                    t
                })
                .collect();
            self.is_feasible(&self.from_unit(&x))
        });
        if !feasible {
            return Err(OptimizerError::Space("constraints leave no feasible region".into()));
        }
        Ok(())
    }

    pub fn in_bounds(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.dims.iter().zip(x).all(|(d, &v)| v >= d.lo && v <= d.hi)
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.in_bounds(x) && self.constraints.iter().all(|c| c.slack(x) >= 0.0)
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(x).map(|(d, v)| (v - d.lo) / (d.hi - d.lo)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(d, t)| d.lo + t.clamp(0.0, 1.0) * (d.hi - d.lo)).collect()
    }

    /// Uniformly random feasible point by rejection.
    pub fn random_feasible(&self, rng: &mut impl Rng) -> Result<Vec<f64>, OptimizerError> {
        for _ in 0..100_000 {
            let u: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
            let x = self.from_unit(&u);
            if self.is_feasible(&x) {
                return Ok(x);
            }
        }
        Err(OptimizerError::Space("could not sample a feasible point".into()))
    }
}

const LHS_ROUNDS: usize = 20;
const LHS_REDRAWS: usize = 50;

/// `n` points, one per stratum in every dimension. Infeasible points are
/// first redrawn within their strata; if some stay infeasible, the strata of
/// one dimension are reassigned by a bipartite matching between points and
/// strata over the cells that admit a feasible draw.
pub fn latin_hypercube(space: &ParameterSpace, n: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>, OptimizerError> {
    if n == 0 {
        return Err(OptimizerError::Settings("latin hypercube needs n >= 1".into()));
    }
    let d = space.dim();
    let draw = |cell: &[usize], rng: &mut dyn rand::RngCore| -> Option<Vec<f64>> {
        for _ in 0..LHS_REDRAWS {
            let u: Vec<f64> = cell.iter().map(|&s| (s as f64 + rng.random::<f64>()) / n as f64).collect();
            let x = space.from_unit(&u);
            if space.is_feasible(&x) {
                return Some(x);
            }
        }
        None
    };
    let cell = |perms: &[Vec<usize>], i: usize| -> Vec<usize> { perms.iter().map(|p| p[i]).collect() };
    for _ in 0..LHS_ROUNDS {
        let mut perms: Vec<Vec<usize>> = (0..d)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        let mut pts: Vec<Option<Vec<f64>>> = (0..n).map(|i| draw(&cell(&perms, i), rng)).collect();
        let mut dims: Vec<usize> = (0..d).collect();
        dims.shuffle(rng);
        for &k in &dims {
            if pts.iter().all(Option::is_some) {
                break;
            }
            // Feasible draws for every (point, stratum of dimension k) pair.
            let options: Vec<Vec<(usize, Vec<f64>)>> = (0..n)
                .map(|i| {
                    let mut c = cell(&perms, i);
                    let mut o: Vec<(usize, Vec<f64>)> = (0..n)
                        .filter_map(|s| {
                            c[k] = s;
                            draw(&c, rng).map(|x| (s, x))
                        })
                        .collect();
                    o.shuffle(rng);
                    o
                })
                .collect();
            let mut owner: Vec<Option<usize>> = vec![None; n];
            for i in 0..n {
                if pts[i].is_some() {
                    owner[perms[k][i]] = Some(i);
                }
            }
            let mut complete = true;
            for i in 0..n {
                if pts[i].is_none() {
                    let mut seen = vec![false; n];
                    if !augment(i, &options, &mut owner, &mut seen) {
                        complete = false;
                        break;
                    }
                }
            }
            if !complete {
                continue;
            }
            for (s, o) in owner.iter().enumerate() {
                let i = o.expect("perfect matching");
                if perms[k][i] != s || pts[i].is_none() {
                    perms[k][i] = s;
                    pts[i] = options[i].iter().find(|(t, _)| *t == s).map(|(_, x)| x.clone());
                }
            }
        }
        if pts.iter().all(Option::is_some) {
            return Ok(pts.into_iter().map(Option::unwrap).collect());
        }
    }
    Err(OptimizerError::Space(format!("constraints too tight to fill a {n}-point latin hypercube")))
}

/// Kuhn augmenting path from point `i`.
fn augment(i: usize, options: &[Vec<(usize, Vec<f64>)>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &(s, _) in &options[i] {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        if owner[s].is_none_or(|j| augment(j, options, owner, seen)) {
            owner[s] = Some(i);
            return true;
        }
    }
    false
}

/// Geometry search over `h`, `r_t`, `d_z` (and coating thickness for
/// hybrid cones) around a template design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncSpace {
    pub template_geometry: IncGeometry,
    pub template_dipole: DipoleSource,
    pub space: ParameterSpace,
}

/// Bounds override file contents; missing keys keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub h_nm: Option<[f64; 2]>,
    pub rt_nm: Option<[f64; 2]>,
    pub dz_nm: Option<[f64; 2]>,
    pub coating_nm: Option<[f64; 2]>,
    /// Minimum distance between the emitter and the cone base.
    pub dz_margin_nm: Option<f64>,
}

pub const DEFAULT_H: [f64; 2] = [200.0, 2000.0];
pub const DEFAULT_RT: [f64; 2] = [100.0, 1200.0];
pub const DEFAULT_DZ_MARGIN: f64 = 20.0;
pub const DEFAULT_COATING: [f64; 2] = [50.0, 1000.0];

impl IncSpace {
    pub fn new(geometry: IncGeometry, dipole: DipoleSource, bounds: &BoundsSpec) -> Result<Self, OptimizerError> {
        let margin = bounds.dz_margin_nm.unwrap_or(DEFAULT_DZ_MARGIN);
        if !(margin >= 0.0) {
            return Err(OptimizerError::Space(format!("dz margin {margin} must be non-negative")));
        }
        let h = bounds.h_nm.unwrap_or(DEFAULT_H);
        let rt = bounds.rt_nm.unwrap_or(DEFAULT_RT);
        let dz = bounds.dz_nm.unwrap_or([margin, h[1] - margin]);
        if !(rt[0] > geometry.r_b) {
            return Err(OptimizerError::Space(format!("r_t lower bound {} must exceed r_b = {}", rt[0], geometry.r_b)));
        }
        if !(h[0] > 0.0 && dz[0] > 0.0) {
            return Err(OptimizerError::Space("bounds must be positive".into()));
        }
        let dim = |name: &str, b: [f64; 2]| Dimension { name: name.into(), lo: b[0], hi: b[1] };
        let mut dims = vec![dim("h_nm", h), dim("rt_nm", rt), dim("dz_nm", dz)];
        // d_z ≤ h − margin
        let mut constraints = vec![LinearConstraint { coeffs: vec![-1.0, 0.0, 1.0], bound: -margin }];
        if geometry.coating_thickness > 0.0 {
            dims.push(dim("coating_nm", bounds.coating_nm.unwrap_or(DEFAULT_COATING)));
            for c in &mut constraints {
                c.coeffs.push(0.0);
            }
            // coating ≤ h
            constraints.push(LinearConstraint { coeffs: vec![-1.0, 0.0, 0.0, 1.0], bound: 0.0 });
        }
        let space = ParameterSpace::new(dims, constraints)?;
        Ok(Self { template_geometry: geometry, template_dipole: dipole, space })
    }

    pub fn design(&self, x: &[f64]) -> (IncGeometry, DipoleSource) {
        let mut g = self.template_geometry;
        let mut d = self.template_dipole;
        g.h = x[0];
        g.r_t = x[1];
        d.d_z = x[2];
        if let Some(&c) = x.get(3) {
            g.coating_thickness = c;
        }
        (g, d)
    }
}
