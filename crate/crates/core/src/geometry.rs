//! Inverted-nanocone parametrization, emitter placement and the permittivity
//! map the solver rasterizes.
//!
//! Coordinates are in nanometres. The sample surface (the plane the cone tip
//! stands on) is `z = 0`, the top facet of the cone is at `z = h`, and the cone
//! axis is the `z` axis. Everything above the substrate that is not cone is
//! ambient medium.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Refractive index of diamond at the tin-vacancy zero-phonon line.
pub const N_DIAMOND: f64 = 2.41;
/// Index of the high-index coating used for hybrid cones.
pub const N_HYBRID_COATING: f64 = 3.65;
/// Bottom radius every optimized design is pinned to.
pub const DEFAULT_BOTTOM_RADIUS_NM: f64 = 1.0;
/// Tilt of a `<111>` dipole against a (100) surface: `atan(1/sqrt(2))`.
pub const TETRAHEDRAL_TILT_DEG: f64 = 35.264_389_682_754_654;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{name} must be a finite non-negative length, got {value}")]
    NegativeLength { name: &'static str, value: f64 },
    #[error("cone height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("top radius {r_t} nm must exceed bottom radius {r_b} nm (inverted cone)")]
    NotInverted { r_t: f64, r_b: f64 },
    #[error("coating thickness {coating} nm exceeds cone height {h} nm")]
    CoatingTooThick { coating: f64, h: f64 },
    #[error("refractive index {name} must be >= 1, got {value}")]
    BadIndex { name: &'static str, value: f64 },
    #[error("emitter depth d_z = {d_z} nm must lie strictly inside the cone (0, {h})")]
    EmitterOutside { d_z: f64, h: f64 },
    #[error("polar tilt {0} deg outside [0, 90]")]
    BadTilt(f64),
    #[error("wavelength must be positive, got {0}")]
    BadWavelength(f64),
}

/// The three refractive indices of the material stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub diamond: f64,
    pub coating: f64,
    pub ambient: f64,
}

impl IndexSet {
    pub const fn diamond_only() -> Self {
        Self { diamond: N_DIAMOND, coating: N_DIAMOND, ambient: 1.0 }
    }

    pub const fn hybrid() -> Self {
        Self { diamond: N_DIAMOND, coating: N_HYBRID_COATING, ambient: 1.0 }
    }
}

impl Default for IndexSet {
    fn default() -> Self {
        Self::diamond_only()
    }
}

/// Inverted nanocone on a diamond substrate, optionally with a high-index
/// layer forming the top `coating_thickness` of the cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncGeometry {
    #[serde(rename = "h_nm")]
    pub h: f64,
    #[serde(rename = "rt_nm")]
    pub r_t: f64,
    #[serde(rename = "rb_nm", default = "default_rb")]
    pub r_b: f64,
    #[serde(rename = "coating_nm", default)]
    pub coating_thickness: f64,
    #[serde(default = "default_n_diamond")]
    pub n_diamond: f64,
    #[serde(default = "default_n_diamond")]
    pub n_coating: f64,
    #[serde(default = "default_n_ambient")]
    pub n_ambient: f64,
    #[serde(default = "default_true")]
    pub substrate: bool,
}

fn default_rb() -> f64 {
    DEFAULT_BOTTOM_RADIUS_NM
}
fn default_n_diamond() -> f64 {
    N_DIAMOND
}
fn default_n_ambient() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

/// Builds and validates a cone.
pub fn make_inc(
    h: f64,
    r_t: f64,
    r_b: f64,
    coating_thickness: f64,
    indices: IndexSet,
) -> Result<IncGeometry, GeometryError> {
    let g = IncGeometry {
        h,
        r_t,
        r_b,
        coating_thickness,
        n_diamond: indices.diamond,
        n_coating: indices.coating,
        n_ambient: indices.ambient,
        substrate: true,
    };
    g.validate()?;
    Ok(g)
}

impl IncGeometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, value) in [("r_t", self.r_t), ("r_b", self.r_b), ("coating_thickness", self.coating_thickness)] {
            if !value.is_finite() || value < 0.0 {
                return Err(GeometryError::NegativeLength { name, value });
            }
        }
        if !self.h.is_finite() || self.h <= 0.0 {
            return Err(GeometryError::NonPositiveHeight(self.h));
        }
        if self.r_t <= self.r_b {
            return Err(GeometryError::NotInverted { r_t: self.r_t, r_b: self.r_b });
        }
        if self.coating_thickness > self.h {
            return Err(GeometryError::CoatingTooThick { coating: self.coating_thickness, h: self.h });
        }
        for (name, value) in [("n_diamond", self.n_diamond), ("n_coating", self.n_coating), ("n_ambient", self.n_ambient)] {
            if !value.is_finite() || value < 1.0 {
                return Err(GeometryError::BadIndex { name, value });
            }
        }
        Ok(())
    }

    /// Angle between the sample surface and the cone wall, in degrees.
    pub fn sidewall_angle_deg(&self) -> f64 {
        (self.h / (self.r_t - self.r_b)).atan().to_degrees()
    }

    /// Cone radius at height `z` (only meaningful for `0 <= z <= h`).
    pub fn radius_at(&self, z: f64) -> f64 {
        self.r_b + (self.r_t - self.r_b) * z / self.h
    }

    pub fn is_hybrid(&self) -> bool {
        self.coating_thickness > 0.0 && self.n_coating != self.n_diamond
    }

    pub fn max_index(&self) -> f64 {
        let coat = if self.coating_thickness > 0.0 { self.n_coating } else { 1.0 };
        self.n_diamond.max(coat).max(self.n_ambient)
    }

    /// Relative permittivity (n²) at a point.
    pub fn permittivity_at(&self, p: [f64; 3]) -> f64 {
        let n = self.index_at(p);
        n * n
    }

    fn index_at(&self, [x, y, z]: [f64; 3]) -> f64 {
        if z < 0.0 {
            return if self.substrate { self.n_diamond } else { self.n_ambient };
        }
        if z > self.h {
            return self.n_ambient;
        }
        let rho = x.hypot(y);
        if rho <= self.radius_at(z) {
            if z >= self.h - self.coating_thickness && self.coating_thickness > 0.0 {
                self.n_coating
            } else {
                self.n_diamond
            }
        } else {
            self.n_ambient
        }
    }

    /// Lower bound on the distance from `p` to any material interface.
    fn interface_distance(&self, [x, y, z]: [f64; 3]) -> f64 {
        let rho = x.hypot(y);
        let mut d = f64::INFINITY;
        // Substrate surface outside the cone foot.
        if self.substrate {
            d = d.min(seg_dist((rho, z), (self.r_b, 0.0), (f64::MAX / 4.0, 0.0)));
        } else {
            d = d.min(seg_dist((rho, z), (0.0, 0.0), (self.r_b, 0.0)));
        }
        d = d.min(seg_dist((rho, z), (self.r_b, 0.0), (self.r_t, self.h)));
        d = d.min(seg_dist((rho, z), (0.0, self.h), (self.r_t, self.h)));
        if self.coating_thickness > 0.0 && self.n_coating != self.n_diamond {
            let zc = self.h - self.coating_thickness;
            d = d.min(seg_dist((rho, z), (0.0, zc), (self.radius_at(zc), zc)));
        }
        d
    }
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dz) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dz * dz;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dz) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cz) = (a.0 + t * dx, a.1 + t * dz);
    (p.0 - cx).hypot(p.1 - cz)
}

/// Anything the solver can rasterize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scene {
    /// An inverted nanocone on its substrate.
    Cone(IncGeometry),
    /// Unbounded homogeneous medium.
    Homogeneous { index: f64 },
    /// Flat substrate filling `z < 0` under an ambient half-space. The
    /// interface is unbounded but the far-field box spans only half the
    /// solver padding on each side, so converged air patterns need a padding
    /// of several wavelengths.
    FlatSubstrate { substrate_index: f64, ambient_index: f64 },
}

impl Scene {
    pub fn vacuum() -> Self {
        Scene::Homogeneous { index: 1.0 }
    }

    pub fn permittivity_at(&self, p: [f64; 3]) -> f64 {
        match self {
            Scene::Cone(g) => g.permittivity_at(p),
            Scene::Homogeneous { index } => index * index,
            Scene::FlatSubstrate { substrate_index, ambient_index } => {
                let n = if p[2] < 0.0 { substrate_index } else { ambient_index };
                n * n
            }
        }
    }

    pub fn interface_distance(&self, p: [f64; 3]) -> f64 {
        match self {
            Scene::Cone(g) => g.interface_distance(p),
            Scene::Homogeneous { .. } => f64::INFINITY,
            Scene::FlatSubstrate { .. } => p[2].abs(),
        }
    }

    pub fn max_index(&self) -> f64 {
        match self {
            Scene::Cone(g) => g.max_index(),
            Scene::Homogeneous { index } => *index,
            Scene::FlatSubstrate { substrate_index, ambient_index } => substrate_index.max(*ambient_index),
        }
    }

    pub fn ambient_index(&self) -> f64 {
        match self {
            Scene::Cone(g) => g.n_ambient,
            Scene::Homogeneous { index } => *index,
            Scene::FlatSubstrate { ambient_index, .. } => *ambient_index,
        }
    }

    /// Height of the emitting top facet; dipole depth is measured from here.
    pub fn top_z(&self) -> f64 {
        match self {
            Scene::Cone(g) => g.h,
            _ => 0.0,
        }
    }

    /// Lateral radius of the structured region.
    pub fn lateral_radius(&self) -> f64 {
        match self {
            Scene::Cone(g) => g.r_t,
            _ => 0.0,
        }
    }

    /// Whether a substrate half-space sits below `z = 0`.
    pub fn has_substrate(&self) -> bool {
        match self {
            Scene::Cone(g) => g.substrate,
            Scene::Homogeneous { .. } => false,
            Scene::FlatSubstrate { .. } => true,
        }
    }
}

/// A point dipole emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleSource {
    /// Depth below the top facet.
    #[serde(rename = "dz_nm")]
    pub d_z: f64,
    /// Lateral offset along `x` from the cone axis.
    #[serde(rename = "dx_nm", default)]
    pub d_x: f64,
    /// Angle of the dipole axis out of the sample plane.
    #[serde(rename = "tilt_deg", default)]
    pub polar_tilt: f64,
    #[serde(rename = "azimuth_deg", default)]
    pub azimuth: f64,
    #[serde(rename = "wavelength_nm", default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_wavelength() -> f64 {
    619.0
}
fn default_amplitude() -> f64 {
    1.0
}

impl DipoleSource {
    /// In-plane `x` dipole at depth `d_z` on the axis, at 619 nm.
    pub fn horizontal(d_z: f64) -> Self {
        Self { d_z, d_x: 0.0, polar_tilt: 0.0, azimuth: 0.0, wavelength: 619.0, amplitude: 1.0 }
    }

    /// `<111>` dipole in a (100)-terminated crystal.
    pub fn tetrahedral(d_z: f64) -> Self {
        Self { polar_tilt: TETRAHEDRAL_TILT_DEG, ..Self::horizontal(d_z) }
    }

    pub fn with_wavelength(mut self, wavelength: f64) -> Self {
        self.wavelength = wavelength;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(0.0..=90.0).contains(&self.polar_tilt) {
            return Err(GeometryError::BadTilt(self.polar_tilt));
        }
        if !(self.wavelength > 0.0) {
            return Err(GeometryError::BadWavelength(self.wavelength));
        }
        Ok(())
    }

    /// Whether reflecting `x → -x` maps the dipole onto itself up to sign.
    pub fn is_mirror_symmetric_in_x(&self) -> bool {
        let along = |a: f64, b: f64| (a - b).abs() < 1e-12;
        let tilt_ok = along(self.polar_tilt, 0.0) || along(self.polar_tilt, 90.0);
        let az = self.azimuth.rem_euclid(90.0);
        tilt_ok && (along(az, 0.0) || along(az, 90.0) || along(self.polar_tilt, 90.0))
    }

    /// Checks the emitter sits inside the given cone.
    pub fn validate_in(&self, g: &IncGeometry) -> Result<(), GeometryError> {
        self.validate()?;
        if !(self.d_z > 0.0 && self.d_z < g.h) {
            return Err(GeometryError::EmitterOutside { d_z: self.d_z, h: g.h });
        }
        Ok(())
    }

    /// Emitter position in scene coordinates.
    pub fn position(&self, scene: &Scene) -> [f64; 3] {
        [self.d_x, 0.0, scene.top_z() - self.d_z]
    }
}

/// Cartesian dipole moment `(px, py, pz)`.
pub fn dipole_components(source: &DipoleSource) -> [f64; 3] {
    let tilt = source.polar_tilt.to_radians();
    let az = source.azimuth.to_radians();
    let a = source.amplitude;
    [a * tilt.cos() * az.cos(), a * tilt.cos() * az.sin(), a * tilt.sin()]
}

/// A sampled material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSample {
    pub position: [f64; 3],
    pub permittivity: f64,
}

impl MaterialSample {
    pub fn at(scene: &Scene, position: [f64; 3]) -> Self {
        Self { position, permittivity: scene.permittivity_at(position) }
    }
}

/// Volume-fraction averaged permittivity of the axis-aligned cube of edge
/// `size` centred at `center`, using `sub`³ samples. Cubes further than their
/// half-diagonal from any interface are returned unsampled.
pub fn averaged_permittivity(scene: &Scene, center: [f64; 3], size: f64, sub: usize) -> f64 {
    let half_diag = 0.5 * size * 3f64.sqrt();
    if scene.interface_distance(center) > half_diag {
        return scene.permittivity_at(center);
    }
    let mut acc = 0.0;
    let step = size / sub as f64;
    let start = -0.5 * size + 0.5 * step;
    for a in 0..sub {
        let x = center[0] + start + a as f64 * step;
        for b in 0..sub {
            let y = center[1] + start + b as f64 * step;
            for c in 0..sub {
                let z = center[2] + start + c as f64 * step;
                acc += scene.permittivity_at([x, y, z]);
            }
        }
    }
    acc / (sub * sub * sub) as f64
}
