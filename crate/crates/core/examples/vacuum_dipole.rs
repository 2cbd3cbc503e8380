//! Radiates a dipole in vacuum and compares power and far field with the
//! closed-form result.

use nanocone::farfield::{dipole_far_field, near_to_far};
use nanocone::geometry::{dipole_components, DipoleSource, Scene};
use nanocone::solver::{analytic_dipole_power, simulate, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dipole = DipoleSource::horizontal(0.0);
    let settings = SolverSettings { padding: 300.0, ..SolverSettings::default().with_resolution(15.0) };
    let fields = simulate(&Scene::vacuum(), &dipole, &settings)?;
    let exact = analytic_dipole_power(dipole.wavelength, 1.0, dipole.amplitude);
    println!("emitted power {:.4e} (closed form {:.4e}, ratio {:.4})", fields.emitted_power, exact, fields.emitted_power / exact);
    println!("{} steps, cell {:.1} nm", fields.stats.steps, fields.stats.cell_size_nm);

    let ff = near_to_far(&fields)?;
    let p = dipole_components(&dipole);
    let closed = |it: usize| {
        let (et, ep) = dipole_far_field(dipole.wavelength, 1.0, p, ff.grid.theta[it], ff.grid.phi[0]);
        et.norm_sqr() + ep.norm_sqr()
    };
    let (i0, c0) = (ff.intensity(0, 0), closed(0));
    println!("pattern along phi = 0, normalized to the zenith:");
    for it in (0..ff.n_theta()).step_by(15) {
        println!(
            "  theta {:5.1}°  numeric {:.4}  closed form {:.4}",
            ff.grid.theta[it].to_degrees(),
            ff.intensity(it, 0) / i0,
            closed(it) / c0
        );
    }
    Ok(())
}
