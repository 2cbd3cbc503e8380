//! Purcell factors: a dipole in bulk diamond (unity by construction) and
//! inside a rate-enhancing cone.

use nanocone::geometry::{make_inc, DipoleSource, IndexSet, Scene, N_DIAMOND};
use nanocone::solver::{analytic_dipole_power, purcell_factor, simulate, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let settings = SolverSettings { farfield: false, ..SolverSettings::default().with_resolution(12.0) };
    let d = DipoleSource::horizontal(0.0);
    let vac = simulate(&Scene::vacuum(), &d, &settings)?.emitted_power;
    let dia = simulate(&Scene::Homogeneous { index: N_DIAMOND }, &d, &settings)?.emitted_power;
    println!(
        "diamond / vacuum power {:.3} (closed form {:.3})",
        dia / vac,
        analytic_dipole_power(619.0, N_DIAMOND, 1.0) / analytic_dipole_power(619.0, 1.0, 1.0)
    );
    let bulk = purcell_factor(&Scene::Homogeneous { index: N_DIAMOND }, &d, &settings)?;
    println!("bulk diamond F = {:.3}", bulk.factor);

    let g = make_inc(1599.0, 914.0, 1.0, 0.0, IndexSet::diamond_only())?;
    let cone = purcell_factor(&Scene::Cone(g), &DipoleSource::horizontal(1286.0), &settings)?;
    println!("cone F = {:.3}", cone.factor);
    Ok(())
}
