pub mod farfield;
pub mod fiber;
pub mod geometry;
pub mod io;
pub mod merit;
pub mod optimizer;
pub mod solver;
pub mod special;

/// Version tag embedded in every output artifact.
pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
