//! Binary dump of a frequency-domain field slice.
//!
//! Layout, all little-endian:
//!
//! | offset | type | content |
//! |--------|------|---------|
//! | 0 | `[u8; 8]` | magic `NCFIELD\0` |
//! | 8 | `u32` | format version (1) |
//! | 12 | `u32` × 3 | dims `nx, ny, nz` |
//! | 24 | `f64` | cell size (nm) |
//! | 32 | `f64` × 3 | position of sample `(0,0,0)` (nm) |
//! | 56 | `f64` | wavelength (nm) |
//! | 64 | ... | `nx·ny·nz` records, row-major with `z` fastest |
//!
//! Each record is `(Re Ex, Im Ex, Re Ey, Im Ey, Re Ez, Im Ez)` as `f64`.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const MAGIC: [u8; 8] = *b"NCFIELD\0";
pub const VERSION: u32 = 1;

/// Complex E on a slab of grid nodes, per unit dipole moment.
///
/// Components are taken at their own staggered positions of the listed node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPlane {
    pub dims: [usize; 3],
    pub cell_size: f64,
    pub origin: [f64; 3],
    pub wavelength: f64,
    pub data: Vec<[Complex64; 3]>,
}

impl FieldPlane {
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for d in self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&self.cell_size.to_le_bytes())?;
        for o in self.origin {
            w.write_all(&o.to_le_bytes())?;
        }
        w.write_all(&self.wavelength.to_le_bytes())?;
        for rec in &self.data {
            for c in rec {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a field dump"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unsupported dump version {version}")));
        }
        let dims = [read_u32(&mut r)? as usize, read_u32(&mut r)? as usize, read_u32(&mut r)? as usize];
        let cell_size = read_f64(&mut r)?;
        let origin = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
        let wavelength = read_f64(&mut r)?;
        let n = dims[0] * dims[1] * dims[2];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let mut rec = [Complex64::default(); 3];
            for c in &mut rec {
                *c = Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?);
            }
            data.push(rec);
        }
        Ok(Self { dims, cell_size, origin, wavelength, data })
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
