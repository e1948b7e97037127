//! Both sides of the weak Burgers identity for every function of the
//! default bank on one realization.
//!
//! cargo run --release --example weak_identity

use burgerslab::colehopf::{cole_hopf, weak_residual};
use burgerslab::harness::default_bank;
use burgerslab::heat::{solve_heat, InitialData, InitialKind};
use burgerslab::noise::{mollify, sample_noise, Mollifier};
use burgerslab::TorusGrid;

fn main() -> burgerslab::Result<()> {
    let g = TorusGrid::unit(1, 128, 0.1, 2 * 128 * 128)?;
    let w = sample_noise(g, 0);
    let mn = mollify(&w, &Mollifier::new(8, g)?)?;
    let f = InitialData::new(InitialKind::Cosine { amplitude: 0.3, wavenumber: 1 }, g)?;
    let traj = cole_hopf(&solve_heat(&g, &mn, &f)?)?;
    println!("{:>5} {:>13} {:>13} {:>11} {:>9}", "phi", "lhs", "rhs", "gap", "gap/|rhs|");
    for phi in default_bank(&g) {
        let rep = weak_residual(&traj, &phi, &mn, &w)?;
        println!("{:>5} {:>13.6e} {:>13.6e} {:>11.3e} {:>9.2e}", rep.phi_id, rep.lhs, rep.rhs, rep.gap, rep.relative_gap());
    }
    Ok(())
}
