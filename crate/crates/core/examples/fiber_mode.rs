//! Guided mode of the visible single-mode fiber and its self-overlap.

use nanocone::fiber::{solve_mode, FiberSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = FiberSpec::visible_single_mode(619.0);
    let mode = solve_mode(&spec)?;
    println!("V = {:.4}  single mode: {}", mode.v, mode.single_mode);
    println!("u = {:.4}  w = {:.4}  beta = {:.6} rad/µm", mode.u, mode.w, mode.beta);
    println!("numeric power {:.8}  self-overlap {:.8}", mode.power_numeric(400), mode.overlap_numeric(&mode, 400));

    println!("angular spectrum (closed form vs quadrature):");
    for q in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!("  q = {q:3.1} /µm  {:+.6e}  {:+.6e}", mode.angular_spectrum(q), mode.angular_spectrum_numeric(q, 400));
    }
    for lambda in [580.0, 619.0, 700.0, 750.0] {
        println!("λ = {lambda} nm  V = {:.3}", spec.with_wavelength(lambda).v_number());
    }
    Ok(())
}
