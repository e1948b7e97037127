//! Time section at `t = 0` of the velocity distribution through a strict
//! delta net, against `⟨∇f, φ⟩`. The noiseless error is O(ε); the noisy
//! sections are printed without a verdict.
//!
//! cargo run --release --example lojasiewicz_section

use burgerslab::colehopf::{cole_hopf, lojasiewicz_section};
use burgerslab::harness::default_bank;
use burgerslab::heat::{solve_heat, InitialData, InitialKind};
use burgerslab::lattice::inner_space;
use burgerslab::noise::{mollify, sample_noise_with_amplitude, Mollifier};
use burgerslab::{TorusGrid, VectorField};

fn main() -> burgerslab::Result<()> {
    let g = TorusGrid::unit(1, 128, 0.1, 2 * 128 * 128)?;
    let kind = InitialKind::Cosine { amplitude: 0.5, wavenumber: 1 };
    let f = InitialData::new(kind.clone(), g)?;
    let grad_f = VectorField::from_fn(g, |x, out| out[0] = kind.partial(&g, x, 0))?;
    let phi = &default_bank(&g)[1];
    let target = inner_space(&grad_f, &phi.sample_spatial(&g)?.field)?;
    for lambda in [0.0, 1.0] {
        let mn = mollify(&sample_noise_with_amplitude(g, 0, lambda), &Mollifier::new(8, g)?)?;
        let traj = cole_hopf(&solve_heat(&g, &mn, &f)?)?;
        for k in [8, 16, 32, 64] {
            let eps = g.horizon() / k as f64;
            let s = lojasiewicz_section(&traj, phi, eps)?;
            println!("lambda = {lambda}, eps = T/{k:<2}: s = {s:+.5e}, <grad f, phi> = {target:+.5e}, error {:.3e}", (s - target).abs());
        }
    }
    Ok(())
}
