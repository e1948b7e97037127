//! On a fixed grid and realization, the mollified noise pairing approaches
//! the white-noise pairing as `n` grows. The difference is itself a pairing
//! of the base noise with `ρ_n * ∇·φ - ∇·φ`, whose norm is its standard
//! deviation.
//!
//! cargo run --release --example limit_pairing

use burgerslab::colehopf::{cole_hopf, weak_residual};
use burgerslab::harness::default_bank;
use burgerslab::heat::{solve_heat, InitialData};
use burgerslab::noise::{mollify, sample_noise, Mollifier};
use burgerslab::TorusGrid;

fn main() -> burgerslab::Result<()> {
    let g = TorusGrid::unit(1, 128, 0.1, 2 * 128 * 128)?;
    let w = sample_noise(g, 3);
    let phi = &default_bank(&g)[1];
    for n in [4, 8, 16, 32] {
        let m = Mollifier::new(n, g)?;
        let mn = mollify(&w, &m)?;
        let traj = cole_hopf(&solve_heat(&g, &mn, &InitialData::zero(g))?)?;
        let rep = weak_residual(&traj, phi, &mn, &w)?;
        let div = phi.sample_spatial(&g)?.divergence;
        let mut smooth = vec![0.0; g.num_nodes()];
        m.convolve(div.values(), &mut smooth);
        let space: f64 = g.cell_volume() * smooth.iter().zip(div.values()).map(|(s, v)| (s - v).powi(2)).sum::<f64>();
        let time: f64 = (0..g.steps()).map(|k| g.dt() * phi.time_factor(g.time(k)).value.powi(2)).sum();
        println!(
            "n = {n:>2}: rhs = {:+.5e}, white-noise pairing = {:+.5e}, |diff| = {:.3e}, std dev = {:.3e}",
            rep.rhs,
            rep.limit_pairing,
            (rep.rhs - rep.limit_pairing).abs(),
            (space * time).sqrt()
        );
    }
    Ok(())
}
