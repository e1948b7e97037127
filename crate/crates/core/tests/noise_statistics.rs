use burgerslab::noise::{coarse_grain_by, h_eval, mollify, pair, sample_noise, sample_noise_with_amplitude, Mollifier, SpaceTimeSamples};
use burgerslab::TorusGrid;
use rayon::prelude::*;
use std::f64::consts::PI;

#[test]
fn increments_have_variance_dt_over_cell_volume() {
    let g = TorusGrid::unit(1, 100, 0.01, 100).unwrap();
    let w = sample_noise(g, 4);
    let inc = w.increments();
    let n = inc.len() as f64;
    let mean = inc.iter().sum::<f64>() / n;
    let var = inc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expected = g.dt() / g.cell_volume();
    assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    assert!(mean.abs() < 4.0 * (expected / n).sqrt());
}

#[test]
fn pairing_variance_matches_l2_norm_over_ten_thousand_seeds() {
    let g = TorusGrid::unit(1, 32, 0.01, 4).unwrap();
    let xi = SpaceTimeSamples::from_fn(g, |t, x| (1.0 + 100.0 * t) * (2.0 * PI * x[0]).cos()).unwrap();
    let draws: Vec<f64> = (0..10_000u64).into_par_iter().map(|s| pair(&sample_noise(g, s), &xi).unwrap()).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var / xi.l2_sq() - 1.0).abs() < 0.05, "{var} vs {}", xi.l2_sq());
}

#[test]
fn mollified_lag_covariance_tracks_h_n() {
    let g = TorusGrid::unit(1, 64, 0.001, 2).unwrap();
    let m = Mollifier::new(8, g).unwrap();
    let seeds = 10_000u64;
    let products: Vec<[f64; 4]> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mn = mollify(&sample_noise(g, s), &m).unwrap();
            let r = mn.slice(0);
            [r[10] * r[10], r[10] * r[12], r[10] * r[16], r[10] * r[30]]
        })
        .collect();
    for (j, lag) in [0usize, 2, 6, 20].into_iter().enumerate() {
        let xs: Vec<f64> = products.iter().map(|p| p[j]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let expected = g.dt() * h_eval(&m, &[lag as f64 * g.dx()]);
        assert!((mean - expected).abs() <= 4.0 * se.max(1e-300), "lag {lag}: {mean} vs {expected} ± {se}");
    }
}

#[test]
fn regeneration_is_bit_identical_and_seeds_differ() {
    let g = TorusGrid::unit(2, 16, 0.01, 10).unwrap();
    assert_eq!(sample_noise(g, 9).increments(), sample_noise(g, 9).increments());
    assert_ne!(sample_noise(g, 9).increments(), sample_noise(g, 10).increments());
}

#[test]
fn amplitude_scales_increments_linearly() {
    let g = TorusGrid::unit(1, 16, 0.01, 10).unwrap();
    let a = sample_noise_with_amplitude(g, 1, 1.0);
    let b = sample_noise_with_amplitude(g, 1, 2.5);
    for (x, y) in a.increments().iter().zip(b.increments()) {
        assert!((2.5 * x - y).abs() <= 1e-15 * y.abs().max(1.0));
    }
    assert!(sample_noise_with_amplitude(g, 1, 0.0).increments().iter().all(|&v| v == 0.0));
}

#[test]
fn coarse_graining_preserves_block_constant_pairings() {
    let fine = TorusGrid::unit(1, 64, 0.01, 64).unwrap();
    let w = sample_noise(fine, 2);
    let coarse = coarse_grain_by(&w, 4, 16).unwrap();
    let cg = *coarse.grid();
    assert_eq!((cg.nodes_per_axis(), cg.steps()), (16, 4));
    let block = |t: f64, x: &[f64]| {
        let (k, i) = ((t / cg.dt()).floor(), (x[0] / cg.dx()).floor());
        (1.0 + k) * (i - 7.5)
    };
    let xi_c = SpaceTimeSamples::from_fn(cg, block).unwrap();
    let xi_f = SpaceTimeSamples::from_fn(fine, |t, x| {
        // sample each fine cell at its own left corner, which lies in the same coarse block
        block(t + 1e-12, &[x[0] + 1e-12])
    })
    .unwrap();
    let (a, b) = (pair(&coarse, &xi_c).unwrap(), pair(&w, &xi_f).unwrap());
    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
}
