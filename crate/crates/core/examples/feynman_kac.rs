//! Monte Carlo Feynman-Kac estimates of `Z_n(t, x)` under both correction
//! modes against the finite-difference solver on the same realization.
//!
//! cargo run --release --example feynman_kac

use burgerslab::fk::{calibrate, fk_estimate, CorrectionMode, FkSettings};
use burgerslab::heat::{solve_heat, InitialData, InitialKind};
use burgerslab::noise::{mollify, sample_noise, Mollifier};
use burgerslab::TorusGrid;

fn main() -> burgerslab::Result<()> {
    let g = TorusGrid::unit(1, 64, 0.1, 2 * 64 * 64)?;
    let mn = mollify(&sample_noise(g, 0), &Mollifier::new(8, g)?)?;
    let f = InitialData::new(InitialKind::Cosine { amplitude: 0.5, wavenumber: 1 }, g)?;
    let sol = solve_heat(&g, &mn, &f)?;
    let probes: Vec<(usize, usize)> = [(g.steps() / 2, 10), (3 * g.steps() / 4, 30), (g.steps(), 50)].into();
    let cal = calibrate(&mn, &f, &probes, 10_000, 1, |k, i| sol.trajectory()[k].values()[i])?;
    for row in &cal.rows {
        println!("{}", row.csv_row());
    }
    println!("selected mode: {}", cal.selected);

    let (k, i) = probes[2];
    for paths in [100, 1_000, 10_000] {
        let est = fk_estimate(&mn, &f, g.time(k), &g.coords(i)[..1], &FkSettings { num_paths: paths, mode: CorrectionMode::ItoCompensated, path_seed: 2 })?;
        println!("{paths:>6} paths: mean {:.5}, stderr {:.2e}", est.mean, est.stderr);
    }
    Ok(())
}
