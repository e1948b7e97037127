use burgerslab::fk::{brownian_path, calibrate, fk_estimate, fk_estimate_with, CorrectionMode, FkSettings};
use burgerslab::heat::{solve_heat, InitialData, InitialKind};
use burgerslab::noise::{mollify, sample_noise, sample_noise_with_amplitude, Mollifier};
use burgerslab::{Error, TorusGrid};
use std::f64::consts::PI;

#[test]
fn brownian_displacement_has_variance_two_t_per_axis() {
    let g = TorusGrid::unit(2, 16, 0.5, 50).unwrap();
    let n = 4000;
    for axis in 0..2 {
        let xs: Vec<f64> = (0..n).map(|i| brownian_path(&g, 8, i).displacement(50)[axis]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // chi-square spread at 4000 draws is about 2.2%
        assert!((var / (2.0 * 0.5) - 1.0).abs() < 0.1, "axis {axis}: {var}");
        assert!(mean.abs() < 4.0 * (1.0 / n as f64).sqrt());
    }
}

#[test]
fn noiseless_fourier_mode_is_reproduced_within_standard_errors() {
    let g = TorusGrid::unit(1, 64, 0.05, 1000).unwrap();
    let quiet = mollify(&sample_noise_with_amplitude(g, 0, 0.0), &Mollifier::new(8, g).unwrap()).unwrap();
    let k = 2.0 * PI;
    for x in [0.0, 0.25, 0.5] {
        let est = fk_estimate_with(
            &quiet,
            |y: &[f64]| 1.0 + 0.5 * (k * y[0]).cos(),
            0.05,
            &[x],
            &FkSettings { num_paths: 5000, mode: CorrectionMode::ItoCompensated, path_seed: 4 },
        )
        .unwrap();
        let exact = 1.0 + 0.5 * (-k * k * 0.05f64).exp() * (k * x).cos();
        assert!((est.mean - exact).abs() <= 4.0 * est.stderr, "x = {x}: {} vs {exact} ± {}", est.mean, est.stderr);
    }
}

#[test]
fn compensated_mode_wins_the_calibration() {
    let g = TorusGrid::unit(1, 32, 0.05, 400).unwrap();
    let mn = mollify(&sample_noise(g, 6), &Mollifier::new(4, g).unwrap()).unwrap();
    let f = InitialData::new(InitialKind::Cosine { amplitude: 0.3, wavenumber: 1 }, g).unwrap();
    let sol = solve_heat(&g, &mn, &f).unwrap();
    let cal = calibrate(&mn, &f, &[(200, 4), (400, 20)], 4000, 1, |k, i| sol.trajectory()[k].values()[i]).unwrap();
    assert_eq!(cal.selected, CorrectionMode::ItoCompensated);
    assert!(cal.max_abs_z(CorrectionMode::ItoCompensated) <= 4.0);
    assert!(cal.max_abs_z(CorrectionMode::Uncompensated) > 4.0);
    assert_eq!(cal.rows.len(), 4);
}

#[test]
fn estimates_are_independent_of_thread_count() {
    let g = TorusGrid::unit(1, 32, 0.05, 400).unwrap();
    let mn = mollify(&sample_noise(g, 6), &Mollifier::new(4, g).unwrap()).unwrap();
    let f = InitialData::zero(g);
    let s = FkSettings { num_paths: 1000, mode: CorrectionMode::ItoCompensated, path_seed: 3 };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| fk_estimate(&mn, &f, 0.05, &[0.5], &s).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn off_grid_queries_and_tiny_ensembles_are_rejected() {
    let g = TorusGrid::unit(1, 32, 0.05, 400).unwrap();
    let mn = mollify(&sample_noise(g, 6), &Mollifier::new(4, g).unwrap()).unwrap();
    let f = InitialData::zero(g);
    let s = FkSettings { num_paths: 1000, mode: CorrectionMode::ItoCompensated, path_seed: 3 };
    assert!(matches!(fk_estimate(&mn, &f, 0.05, &[0.51], &s), Err(Error::OffGrid(_))));
    assert!(matches!(fk_estimate(&mn, &f, 0.0501, &[0.5], &s), Err(Error::OffGrid(_))));
    let few = FkSettings { num_paths: 99, ..s };
    assert!(matches!(fk_estimate(&mn, &f, 0.05, &[0.5], &few), Err(Error::TooFewPaths(99))));
}
