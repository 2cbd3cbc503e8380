//! Prints a side view of a hybrid cone: permittivity sampled on the
//! `y = 0` plane, one character per 50 nm.

use nanocone::geometry::{make_inc, IndexSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = make_inc(1462.0, 624.0, 1.0, 607.0, IndexSet::hybrid())?;
    println!("sidewall {:.1}° to the substrate, max index {}", g.sidewall_angle_deg(), g.max_index());
    let step = 50.0;
    let mut z = g.h + step;
    while z > -2.0 * step {
        let row: String = (-16..=16)
            .map(|i| match g.permittivity_at([i as f64 * step, 0.0, z]) {
                e if e > 10.0 => '#',
                e if e > 2.0 => 'o',
                _ => '.',
            })
            .collect();
        println!("{z:7.0} {row}");
        z -= step;
    }
    Ok(())
}
