//! Spectrally averaged collection efficiency against the bundled synthetic
//! emission spectrum, or a two-column CSV given as the first argument.

use std::path::Path;

use nanocone::geometry::{make_inc, DipoleSource, IndexSet};
use nanocone::io::{load_spectrum, synthetic_snv};
use nanocone::merit::{broadband_average, wavelength_grid, Metric, Pipeline, SPECTRAL_WINDOW};
use nanocone::solver::SolverSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spectrum = match std::env::args().nth(1) {
        Some(p) => load_spectrum(Path::new(&p), SPECTRAL_WINDOW)?,
        None => synthetic_snv(),
    };
    println!("spectrum peak at {:.1} nm", spectrum.peak());
    let g = make_inc(511.0, 848.0, 1.0, 0.0, IndexSet::diamond_only())?;
    let d = DipoleSource::horizontal(82.0);
    let pipeline = Pipeline { solver: SolverSettings::default().with_resolution(12.0), ..Pipeline::default() };
    let wl = wavelength_grid(SPECTRAL_WINDOW.0, SPECTRAL_WINDOW.1, 6);
    let curve = pipeline.spectral_curve(Metric::EtaFs, &g, &d, &wl)?;
    for (l, v) in &curve {
        println!("  {l:6.1} nm  eta_fs {v:.4}  I {:.5}", spectrum.density(*l));
    }
    println!("<eta_fs> = {:.4}", broadband_average(&curve, &spectrum)?);
    Ok(())
}
