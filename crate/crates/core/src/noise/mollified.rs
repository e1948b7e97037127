use std::hash::{DefaultHasher, Hash, Hasher};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::noise::mollifier::Mollifier;
use crate::noise::white::WhiteNoiseRealization;

/// Spatial regularization applied to a white-noise realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularization {
    /// Convolution with the bump `rho_n`.
    Bump { scale_n: u32 },
    /// No smoothing; the kernel is the discrete delta `dx^{-d}` at one node.
    GridDelta,
}

/// Increments `dW^n_{k,i} = dx^d sum_j rho_n(x_i - x_j) dW_{k,j}` of the mollified
/// cylindrical Wiener process, per node and time step.
#[derive(Clone, Debug)]
pub struct MollifiedNoise {
    grid: TorusGrid,
    seed: u64,
    lambda: f64,
    regularization: Regularization,
    c_n_discrete: f64,
    increments: Vec<f64>,
    fingerprint: u64,
}

fn fingerprint(seed: u64, regularization: Regularization, increments: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    match regularization {
        Regularization::Bump { scale_n } => scale_n.hash(&mut h),
        Regularization::GridDelta => u32::MAX.hash(&mut h),
    }
    for v in increments {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

impl MollifiedNoise {
    fn assemble(base: &WhiteNoiseRealization, regularization: Regularization, c_n: f64, inc: Vec<f64>) -> Self {
        let fingerprint = fingerprint(base.seed(), regularization, &inc);
        Self {
            grid: *base.grid(),
            seed: base.seed(),
            lambda: base.lambda(),
            regularization,
            c_n_discrete: c_n,
            increments: inc,
            fingerprint,
        }
    }

    /// The grid-scale limit: increments are the raw white-noise increments and
    /// the discrete QV rate is `dx^{-d}`.
    pub fn unmollified(base: &WhiteNoiseRealization) -> Self {
        let c_n = 1.0 / base.grid().cell_volume();
        Self::assemble(base, Regularization::GridDelta, c_n, base.increments().to_vec())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn regularization(&self) -> Regularization {
        self.regularization
    }

    pub fn scale_n(&self) -> Option<u32> {
        match self.regularization {
            Regularization::Bump { scale_n } => Some(scale_n),
            Regularization::GridDelta => None,
        }
    }

    /// Per-unit-time quadratic variation of the unit-amplitude mollified path.
    pub fn c_n_discrete(&self) -> f64 {
        self.c_n_discrete
    }

    /// `lambda^2 c_n`, the rate of the Ito compensator.
    pub fn compensator_rate(&self) -> f64 {
        self.lambda * self.lambda * self.c_n_discrete
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let len = self.grid.num_nodes();
        &self.increments[k * len..(k + 1) * len]
    }

    /// Identifies this exact realization; trajectories record it.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Periodic spatial convolution of every time slice with `rho_n`.
pub fn mollify(noise: &WhiteNoiseRealization, m: &Mollifier) -> Result<MollifiedNoise> {
    let grid = *noise.grid();
    if *m.grid() != grid {
        return Err(Error::ShapeMismatch(format!(
            "mollifier sampled on {:?}, noise on {grid:?}",
            m.grid()
        )));
    }
    if m.support_radius() < 4.0 * grid.dx() {
        return Err(Error::UnderResolvedMollifier {
            support_radius: m.support_radius(),
            min_radius: 4.0 * grid.dx(),
        });
    }
    let len = grid.num_nodes();
    let mut inc = vec![0.0; noise.increments().len()];
    inc.par_chunks_mut(len)
        .enumerate()
        .for_each(|(k, out)| m.convolve(noise.slice(k), out));
    let reg = Regularization::Bump { scale_n: m.scale_n() };
    Ok(MollifiedNoise::assemble(noise, reg, m.c_n_discrete(), inc))
}

/// `W^n_t(x)` at `t = 0, dt, ..., T` for the node with multi-index `node`.
pub fn wiener_path(mn: &MollifiedNoise, node: &[usize]) -> Result<Vec<f64>> {
    let g = &mn.grid;
    if node.len() != g.dim() || node.iter().any(|&c| c >= g.nodes_per_axis()) {
        return Err(Error::OffGrid(format!("{node:?} on a {}-d grid with N = {}", g.dim(), g.nodes_per_axis())));
    }
    let idx = g.flat_index(node);
    let mut path = Vec::with_capacity(g.steps() + 1);
    let mut acc = 0.0;
    path.push(acc);
    for k in 0..g.steps() {
        acc += mn.slice(k)[idx];
        path.push(acc);
    }
    Ok(path)
}

/// Sum of squared increments.
pub fn quadratic_variation(path: &[f64]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::PathTooShort(path.len()));
    }
    Ok(path.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::white::{sample_noise, sample_noise_with_amplitude};

    fn setup(seed: u64, lambda: f64) -> (WhiteNoiseRealization, Mollifier) {
        let g = TorusGrid::unit(1, 64, 0.1, 16).unwrap();
        (sample_noise_with_amplitude(g, seed, lambda), Mollifier::new(8, g).unwrap())
    }

    #[test]
    fn zero_noise_mollifies_to_zero() {
        let (w, m) = setup(1, 0.0);
        let mn = mollify(&w, &m).unwrap();
        assert!(mn.increments().iter().all(|&v| v == 0.0));
        let path = wiener_path(&mn, &[5]).unwrap();
        assert!(path.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mollification_is_linear() {
        let (w, m) = setup(2, 1.0);
        let scaled = WhiteNoiseRealization::from_increments(
            *w.grid(),
            w.seed(),
            1.0,
            w.increments().iter().map(|v| 3.0 * v).collect(),
        )
        .unwrap();
        let (a, b) = (mollify(&w, &m).unwrap(), mollify(&scaled, &m).unwrap());
        for (x, y) in a.increments().iter().zip(b.increments()) {
            assert!((3.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn path_telescopes_to_increments() {
        let (w, m) = setup(3, 1.0);
        let mn = mollify(&w, &m).unwrap();
        let path = wiener_path(&mn, &[10]).unwrap();
        assert_eq!(path.len(), 17);
        assert_eq!(path[0], 0.0);
        for k in 0..16 {
            assert!((path[k + 1] - path[k] - mn.slice(k)[10]).abs() < 1e-15);
        }
        assert!(matches!(wiener_path(&mn, &[64]), Err(Error::OffGrid(_))));
        assert!(matches!(wiener_path(&mn, &[1, 1]), Err(Error::OffGrid(_))));
    }

    #[test]
    fn qv_of_smooth_path_vanishes_with_dt() {
        let slope = 2.0;
        let qv = |m: usize| {
            let dt = 1.0 / m as f64;
            let path: Vec<f64> = (0..=m).map(|k| slope * k as f64 * dt).collect();
            quadratic_variation(&path).unwrap()
        };
        assert!((qv(100) - 100.0 * (slope / 100.0f64).powi(2)).abs() < 1e-12);
        assert!(qv(1000) < qv(100) / 9.0);
        assert!(matches!(quadratic_variation(&[1.0]), Err(Error::PathTooShort(1))));
    }

    #[test]
    fn qv_ignores_sign() {
        let (w, m) = setup(4, 1.0);
        let path = wiener_path(&mollify(&w, &m).unwrap(), &[0]).unwrap();
        let neg: Vec<f64> = path.iter().map(|v| -v).collect();
        assert_eq!(quadratic_variation(&path).unwrap(), quadratic_variation(&neg).unwrap());
    }

    #[test]
    fn rejects_mollifier_from_other_grid() {
        let (w, _) = setup(5, 1.0);
        let other = Mollifier::new(8, TorusGrid::unit(1, 128, 0.1, 16).unwrap()).unwrap();
        assert!(matches!(mollify(&w, &other), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn fingerprints_distinguish_realizations() {
        let (w, m) = setup(6, 1.0);
        let a = mollify(&w, &m).unwrap();
        assert_eq!(a.fingerprint(), mollify(&w, &m).unwrap().fingerprint());
        let other = mollify(&sample_noise(*w.grid(), 7), &m).unwrap();
        assert_ne!(a.fingerprint(), other.fingerprint());
        assert_ne!(a.fingerprint(), MollifiedNoise::unmollified(&w).fingerprint());
    }
}
