//! Noiseless solver against the single-mode heat solution
//! `Z = 1 + a e^{-k²t} cos kx` and its Cole-Hopf velocity, over three
//! refinements with `dt ∝ dx²`.
//!
//! cargo run --release --example heat_oracle

use burgerslab::colehopf::cole_hopf;
use burgerslab::heat::solve_heat_from;
use burgerslab::noise::{sample_noise_with_amplitude, MollifiedNoise};
use burgerslab::{ScalarField, TorusGrid};
use std::f64::consts::PI;

fn main() -> burgerslab::Result<()> {
    let (a, k, t_end) = (0.5, 2.0 * PI, 0.05);
    let mut prev: Option<(f64, f64)> = None;
    for nodes in [32, 64, 128] {
        let g = TorusGrid::unit(1, nodes, t_end, nodes * nodes)?;
        let quiet = MollifiedNoise::unmollified(&sample_noise_with_amplitude(g, 0, 0.0));
        let z0 = ScalarField::from_fn(g, |x| 1.0 + a * (k * x[0]).cos())?;
        let traj = cole_hopf(&solve_heat_from(&g, &quiet, z0)?)?;
        let decay = (-k * k * t_end).exp();
        let z_exact = ScalarField::from_fn(g, |x| 1.0 + a * decay * (k * x[0]).cos())?;
        let h_end = traj.potential().last().expect("non-empty");
        let err_z = h_end.map(f64::exp)?.max_diff(&z_exact);
        let u_end = traj.velocity().last().expect("non-empty");
        let err_u = (0..g.num_nodes())
            .map(|i| {
                let x = g.coords(i)[0];
                let u = -a * decay * k * (k * x).sin() / (1.0 + a * decay * (k * x).cos());
                (u_end.component(0)[i] - u).abs()
            })
            .fold(0.0, f64::max);
        let orders = prev.map(|(pz, pu)| format!("  orders {:.2} {:.2}", (pz / err_z).log2(), (pu / err_u).log2()));
        println!("N = {nodes:>3}: |Z - exact| = {err_z:.3e}, |U - exact| = {err_u:.3e}{}", orders.unwrap_or_default());
        prev = Some((err_z, err_u));
    }
    Ok(())
}
