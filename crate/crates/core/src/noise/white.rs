use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::binfmt;
use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::noise::rng::{stream, Domain};

/// A seeded grid of space-time white-noise increments.
///
/// `increments[k * nodes + i]` is the cell average of the noise over time step
/// `k` and the spatial cell of node `i`, i.e. the coefficient of the normalized
/// cell indicator in the expansion of the noise. With amplitude `lambda` each
/// increment is Gaussian with variance `lambda^2 dt / dx^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct WhiteNoiseRealization {
    grid: TorusGrid,
    seed: u64,
    lambda: f64,
    increments: Vec<f64>,
}

impl WhiteNoiseRealization {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Increments of time step `k`.
    pub fn slice(&self, k: usize) -> &[f64] {
        let len = self.grid.num_nodes();
        &self.increments[k * len..(k + 1) * len]
    }

    /// Builds a realization from explicit increments (e.g. for linearity checks).
    pub fn from_increments(grid: TorusGrid, seed: u64, lambda: f64, increments: Vec<f64>) -> Result<Self> {
        let expected = grid.steps() * grid.num_nodes();
        if increments.len() != expected {
            return Err(Error::LengthMismatch { expected, found: increments.len() });
        }
        if let Some(index) = increments.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "noise increments", index });
        }
        Ok(Self { grid, seed, lambda, increments })
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let header = binfmt::Header { grid: self.grid, seed: self.seed, lambda: self.lambda };
        binfmt::write(path, &header, &self.increments)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let (h, payload) = binfmt::read(path, |g| g.steps())?;
        Self::from_increments(h.grid, h.seed, h.lambda, payload)
    }
}

/// Unit-amplitude noise on `grid`, fully determined by `seed`.
pub fn sample_noise(grid: TorusGrid, seed: u64) -> WhiteNoiseRealization {
    sample_noise_with_amplitude(grid, seed, 1.0)
}

/// Noise scaled by `lambda`. Each time slice draws from its own counter-based
/// stream, so the result does not depend on thread count or scheduling.
pub fn sample_noise_with_amplitude(grid: TorusGrid, seed: u64, lambda: f64) -> WhiteNoiseRealization {
    let len = grid.num_nodes();
    let sigma = lambda * (grid.dt() / grid.cell_volume()).sqrt();
    let mut increments = vec![0.0; grid.steps() * len];
    increments.par_chunks_mut(len).enumerate().for_each(|(k, slice)| {
        let mut rng = stream(seed, Domain::Noise, k as u64);
        for v in slice {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sigma * z;
        }
    });
    WhiteNoiseRealization { grid, seed, lambda, increments }
}

/// Scalar samples `xi(t_k, x_i)` at the left endpoint of every time step.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeSamples {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl SpaceTimeSamples {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.steps() * grid.num_nodes();
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, found: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "space-time samples", index });
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f(t, x)` at `t_k = k dt`, `k < M`.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, &[f64]) -> f64) -> Result<Self> {
        let len = grid.num_nodes();
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.steps() * len);
        for k in 0..grid.steps() {
            let t = grid.time(k);
            values.extend((0..len).map(|i| f(t, &grid.coords(i)[..d])));
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let len = self.grid.num_nodes();
        &self.values[k * len..(k + 1) * len]
    }

    /// `dt dx^d sum xi^2`, the variance of the white-noise pairing.
    pub fn l2_sq(&self) -> f64 {
        self.grid.dt() * self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()
    }
}

fn pair_raw(grid: &TorusGrid, increments: &[f64], xi: &[f64]) -> f64 {
    grid.cell_volume() * increments.iter().zip(xi).map(|(w, x)| w * x).sum::<f64>()
}

/// Discrete `int xi dW = sum_{k,i} xi_{k,i} dW_{k,i} dx^d`.
pub fn pair(noise: &WhiteNoiseRealization, xi: &SpaceTimeSamples) -> Result<f64> {
    if noise.grid != xi.grid {
        return Err(Error::ShapeMismatch(format!(
            "noise grid {:?} vs test grid {:?}",
            noise.grid, xi.grid
        )));
    }
    Ok(pair_raw(&noise.grid, &noise.increments, &xi.values))
}

/// Block-sums over `factor^d` cells and `factor` steps.
pub fn coarse_grain(noise: &WhiteNoiseRealization, factor: usize) -> Result<WhiteNoiseRealization> {
    coarse_grain_by(noise, factor, factor)
}

/// Block-sums increments over `space_factor^d` cells and `time_factor` steps,
/// divided by `space_factor^d` so the coarse increments are again cell
/// averages (variance `dt'/dx'^d`). Pairing a block-constant test function
/// gives the same value on both levels.
pub fn coarse_grain_by(
    noise: &WhiteNoiseRealization,
    space_factor: usize,
    time_factor: usize,
) -> Result<WhiteNoiseRealization> {
    let fine = noise.grid;
    let coarse = fine.coarsen(space_factor, time_factor)?;
    let (fine_len, coarse_len) = (fine.num_nodes(), coarse.num_nodes());
    let d = fine.dim();
    let node_map: Vec<usize> = (0..fine_len)
        .map(|i| {
            let mut mi = fine.multi_index(i);
            mi[..d].iter_mut().for_each(|c| *c /= space_factor);
            coarse.flat_index(&mi)
        })
        .collect();
    let scale = 1.0 / (space_factor.pow(d as u32) as f64);
    let mut increments = vec![0.0; coarse.steps() * coarse_len];
    increments.par_chunks_mut(coarse_len).enumerate().for_each(|(kc, out)| {
        for k in kc * time_factor..(kc + 1) * time_factor {
            for (w, &j) in noise.slice(k).iter().zip(&node_map) {
                out[j] += w;
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
    });
    Ok(WhiteNoiseRealization { grid: coarse, seed: noise.seed, lambda: noise.lambda, increments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::unit(1, 16, 0.1, 8).unwrap()
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = sample_noise(grid(), 42);
        let b = sample_noise(grid(), 42);
        assert_eq!(a, b);
        assert_ne!(a.increments(), sample_noise(grid(), 43).increments());
    }

    #[test]
    fn thread_count_does_not_change_increments() {
        let g = TorusGrid::unit(2, 16, 0.1, 32).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_noise(g, 7));
        let b = four.install(|| sample_noise(g, 7));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_amplitude_gives_zero_noise() {
        let n = sample_noise_with_amplitude(grid(), 5, 0.0);
        assert!(n.increments().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_test_function_pairs_to_zero() {
        let n = sample_noise(grid(), 1);
        let xi = SpaceTimeSamples::from_fn(grid(), |_, _| 0.0).unwrap();
        assert_eq!(pair(&n, &xi).unwrap(), 0.0);
    }

    #[test]
    fn pair_rejects_other_grids() {
        let n = sample_noise(grid(), 1);
        let other = TorusGrid::unit(1, 32, 0.1, 8).unwrap();
        let xi = SpaceTimeSamples::from_fn(other, |_, _| 1.0).unwrap();
        assert!(matches!(pair(&n, &xi), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn coarse_grain_identity_and_errors() {
        let n = sample_noise(grid(), 3);
        assert_eq!(coarse_grain(&n, 1).unwrap(), n);
        assert!(matches!(coarse_grain(&n, 3), Err(Error::NonDivisible { .. })));
        // 16 / 4 = 4 nodes is below the minimum grid size
        assert!(coarse_grain(&n, 4).is_err());
    }

    #[test]
    fn coarse_pairing_matches_fine_pairing() {
        let fine_grid = TorusGrid::unit(2, 16, 0.1, 8).unwrap();
        let fine = sample_noise(fine_grid, 11);
        let coarse = coarse_grain(&fine, 2).unwrap();
        let cg = *coarse.grid();
        let block = |t: f64, x: &[f64]| (t * 37.0).sin() + x[0] * 3.0 - x[1] * x[1];
        let xi_c = SpaceTimeSamples::from_fn(cg, block).unwrap();
        // extend the coarse samples blockwise onto the fine grid
        let mut ext = Vec::with_capacity(fine_grid.steps() * fine_grid.num_nodes());
        for k in 0..fine_grid.steps() {
            for i in 0..fine_grid.num_nodes() {
                let mut mi = fine_grid.multi_index(i);
                mi[0] /= 2;
                mi[1] /= 2;
                ext.push(xi_c.slice(k / 2)[cg.flat_index(&mi)]);
            }
        }
        let xi_f = SpaceTimeSamples::new(fine_grid, ext).unwrap();
        let (a, b) = (pair(&coarse, &xi_c).unwrap(), pair(&fine, &xi_f).unwrap());
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noise.bin");
        let n = sample_noise_with_amplitude(TorusGrid::new(2, 8, 2.0, 0.3, 3).unwrap(), 99, 0.5);
        n.write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), binfmt::HEADER_BYTES + 3 * 64 * 8);
        assert_eq!(&bytes[0..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[40..48], &99u64.to_le_bytes());
        assert_eq!(&bytes[56..64], &n.increments()[0].to_le_bytes());
        let back = WhiteNoiseRealization::read_binary(&path).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noise.bin");
        sample_noise(grid(), 1).write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(WhiteNoiseRealization::read_binary(&path), Err(Error::Format { .. })));
    }
}
