//! Samples eta_fib over the default cone search space on a Latin hypercube
//! and writes the values as CSV, for use as a cheap cached objective.
//!
//! `cargo run --release --example landscape_cache -- [n] [ppw] [out.csv]`

use std::fs::File;
use std::io::Write;

use nanocone::geometry::{make_inc, DipoleSource, IndexSet};
use nanocone::merit::Pipeline;
use nanocone::optimizer::{latin_hypercube, BoundsSpec, Dimension, IncSpace, ParameterSpace};
use nanocone::solver::SolverSettings;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(64);
    let ppw: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10.0);
    let out = args.next().unwrap_or_else(|| "landscape.csv".into());

    let g = make_inc(1000.0, 500.0, 1.0, 0.0, IndexSet::diamond_only())?;
    let space = IncSpace::new(g, DipoleSource::horizontal(800.0), &BoundsSpec::default())?;
    let pipeline = Pipeline { solver: SolverSettings::default().with_resolution(ppw), ..Pipeline::default() };
    // Stratify the emitter by relative depth so the samples fill the
    // triangle d_z <= h - margin evenly.
    let dims = &space.space.dims;
    let margin = dims[2].lo;
    let unit = ParameterSpace::new(
        vec![dims[0].clone(), dims[1].clone(), Dimension { name: "depth_fraction".into(), lo: 0.0, hi: 1.0 }],
        vec![],
    )?;
    let points: Vec<Vec<f64>> = latin_hypercube(&unit, n, &mut ChaCha8Rng::seed_from_u64(7))?
        .into_iter()
        .map(|p| vec![p[0], p[1], margin + p[2] * (p[0] - 2.0 * margin)])
        .collect();

    let mut f = File::create(&out)?;
    writeln!(f, "h_nm,rt_nm,dz_nm,eta_fib,eta_fs")?;
    for (i, x) in points.iter().enumerate() {
        let (g, d) = space.design(x);
        let t = std::time::Instant::now();
        match pipeline.evaluate(&g, &d) {
            Ok(r) => {
                writeln!(f, "{:.1},{:.1},{:.1},{:.5},{:.5}", x[0], x[1], x[2], r.eta_fib, r.eta_fs)?;
                f.flush()?;
                println!("{i:3}  h {:6.0}  r_t {:6.0}  d_z {:6.0}  eta_fib {:.3}  {:.0} s", x[0], x[1], x[2], r.eta_fib, t.elapsed().as_secs_f64());
            }
            Err(e) => println!("{i:3}  skipped: {e}"),
        }
    }
    Ok(())
}
