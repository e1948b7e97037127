//! Ensemble check of the white-noise pairing law `Var⟨ξ, Ẇ⟩ = ‖ξ‖²` and of
//! the spatial covariance of mollified increments, `dt h_n(lag)`.
//!
//! cargo run --release --example noise_laws

use burgerslab::noise::{h_eval, mollify, pair, sample_noise, Mollifier, SpaceTimeSamples};
use burgerslab::TorusGrid;
use rayon::prelude::*;
use std::f64::consts::PI;

fn main() -> burgerslab::Result<()> {
    let g = TorusGrid::unit(1, 64, 0.01, 8)?;
    let xi = SpaceTimeSamples::from_fn(g, |t, x| (1.0 + t * 50.0) * (2.0 * PI * x[0]).sin())?;
    let m = Mollifier::new(8, g)?;
    let seeds = 10_000u64;

    let samples: Vec<(f64, Vec<f64>)> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let w = sample_noise(g, s);
            let p = pair(&w, &xi).expect("same grid");
            let mn = mollify(&w, &m).expect("resolved");
            let row = mn.slice(0);
            let lags = (0..5).map(|lag| row[0] * row[lag * 2]).collect();
            (p, lags)
        })
        .collect();

    let n = seeds as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    println!("pairing: mean {mean:+.4e}, variance {var:.5e}, law {:.5e}", xi.l2_sq());
    for lag in 0..5 {
        let cov = samples.iter().map(|s| s.1[lag]).sum::<f64>() / n;
        let z = (lag * 2) as f64 * g.dx();
        println!("lag {z:.4}: covariance {cov:.5e}, dt h_n = {:.5e}", g.dt() * h_eval(&m, &[z]));
    }
    Ok(())
}
