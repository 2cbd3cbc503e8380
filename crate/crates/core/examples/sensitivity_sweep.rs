//! Fabrication tolerance of a cone: each parameter swept over ±10 nm.

use nanocone::geometry::{make_inc, DipoleSource, IndexSet};
use nanocone::merit::{Metric, Pipeline};
use nanocone::solver::SolverSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = make_inc(635.0, 391.0, 1.0, 0.0, IndexSet::diamond_only())?;
    let d = DipoleSource::horizontal(507.0);
    let pipeline = Pipeline { solver: SolverSettings::default().with_resolution(12.0), ..Pipeline::default() };
    let s = pipeline.sensitivity(Metric::EtaFs, &g, &d, 10.0, 3)?;
    println!("nominal eta_fs {:.4}", s.nominal);
    for c in &s.curves {
        let pts: Vec<String> = c.samples.iter().map(|(x, v)| format!("{x:+.0}:{v:.4}")).collect();
        println!("  {:8} {}", c.parameter.name(), pts.join("  "));
    }
    println!("S = {:.3}", s.score);
    Ok(())
}
