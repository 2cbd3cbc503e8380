//! Full figure-of-merit report for a fiber-optimized cone.
//!
//! `cargo run --release --example design_report -- [ppw]`

use nanocone::geometry::{make_inc, DipoleSource, IndexSet};
use nanocone::merit::Pipeline;
use nanocone::solver::SolverSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ppw: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(14.0);
    let g = make_inc(635.0, 391.0, 1.0, 0.0, IndexSet::diamond_only())?;
    let d = DipoleSource::horizontal(507.0);
    let pipeline = Pipeline { solver: SolverSettings::default().with_resolution(ppw), ..Pipeline::default() };
    let r = pipeline.evaluate(&g, &d)?;
    println!("h = {} nm, r_t = {} nm, d_z = {} nm, sidewall {:.1}°", g.h, g.r_t, d.d_z, g.sidewall_angle_deg());
    println!("eta_fs   {:.3}", r.eta_fs);
    println!("eta_fib  {:.3}  (x {:.3}, y {:.3}, M = {:.1})", r.eta_fib, r.eta_fib_x, r.eta_fib_y, r.magnification);
    println!("F        {:.3}", r.purcell_factor);
    println!("R        {:.3}", r.rate_enhancement);
    println!("{} ppw, {} steps over {} sub-runs", r.numerics.points_per_wavelength, r.numerics.steps, r.numerics.sub_runs);
    Ok(())
}
