//! Mollifier constants: unit mass, `h_n(0) = ‖ρ‖² nᵈ`, the grid constant
//! `c_n` and the support of the autocorrelation.
//!
//! cargo run --example mollifier_laws

use burgerslab::noise::{h_eval, Mollifier};
use burgerslab::TorusGrid;

fn main() -> burgerslab::Result<()> {
    println!("{:>2} {:>4} {:>6} {:>14} {:>14} {:>14} {:>10}", "d", "N", "n", "C_n", "c_n (grid)", "h_n(0)", "grid mass");
    for (d, nodes) in [(1, 256), (2, 128)] {
        let g = TorusGrid::unit(d, nodes, 1.0, 2)?;
        for n in [4, 8, 16] {
            let m = Mollifier::new(n, g)?;
            let origin = vec![0.0; d];
            println!(
                "{d:>2} {nodes:>4} {n:>6} {:>14.6} {:>14.6} {:>14.6} {:>10.2e}",
                m.c_n_continuum(),
                m.c_n_discrete(),
                h_eval(&m, &origin),
                m.discrete_mass() - 1.0
            );
        }
    }
    let g = TorusGrid::unit(1, 256, 1.0, 2)?;
    let m = Mollifier::new(8, g)?;
    for z in [0.0, 0.1, 0.2, 0.249, 0.25, 0.3] {
        println!("h_8({z:.3}) = {:.6e}", h_eval(&m, &[z]));
    }
    Ok(())
}
