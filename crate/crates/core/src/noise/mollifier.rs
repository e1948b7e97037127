//! The standard bump mollifier `rho(x) = c_d exp(-1/(1-|x|^2))`, its scalings
//! `rho_n(x) = n^d rho(n x)`, and the covariance `h_n = rho_n * rho_n(- .)`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::lattice::{TorusGrid, MAX_DIM};
use crate::quad::{simpson, trapezoid};

/// Simpson panels for the radial integrals behind `c_d` and `||rho||^2`.
const RADIAL_PANELS: usize = 100_000;

/// Unnormalized bump as a function of `|x|^2`.
pub fn bump_sq(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Surface measure of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!("dimension checked by the grid"),
    }
}

/// Dimension-dependent constants of the unit-scale profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    pub dim: usize,
    /// `c_d`, making `rho` integrate to one.
    pub normalization: f64,
    /// `||rho||^2_{L^2}`.
    pub l2_sq: f64,
}

impl BumpProfile {
    /// Cached constants for `d` in `1..=3`, computed once by radial Simpson quadrature.
    pub fn get(d: usize) -> &'static BumpProfile {
        static CACHE: [OnceLock<BumpProfile>; MAX_DIM] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        assert!((1..=MAX_DIM).contains(&d), "bump profile dimension {d}");
        CACHE[d - 1].get_or_init(|| {
            let area = sphere_area(d);
            let radial = |p: i32| {
                simpson(|r| r.powi(d as i32 - 1) * bump_sq(r * r).powi(p), 0.0, 1.0, RADIAL_PANELS)
            };
            let normalization = 1.0 / (area * radial(1));
            let l2_sq = normalization * normalization * area * radial(2);
            BumpProfile { dim: d, normalization, l2_sq }
        })
    }

    /// `rho` at a point given by its squared norm.
    pub fn rho_sq(&self, r2: f64) -> f64 {
        self.normalization * bump_sq(r2)
    }

    /// `h_1(r) = int rho(u) rho(u + r e_1) du` by tensor trapezoid quadrature.
    ///
    /// The integrand is smooth with all derivatives vanishing on the box boundary,
    /// so the trapezoid rule converges faster than any power of the panel width.
    pub fn autocorrelation(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 2.0 {
            return 0.0;
        }
        let (lo, hi) = (-1.0, 1.0 - r);
        match self.dim {
            1 => trapezoid(|u| self.rho_sq(u * u) * self.rho_sq((u + r) * (u + r)), lo, hi, 4000),
            2 => {
                let panels = 400;
                trapezoid(
                    |u0| {
                        let a = u0 * u0;
                        let b = (u0 + r) * (u0 + r);
                        trapezoid(|u1| self.rho_sq(a + u1 * u1) * self.rho_sq(b + u1 * u1), -1.0, 1.0, panels)
                    },
                    lo,
                    hi,
                    panels,
                )
            }
            _ => {
                let panels = 160;
                trapezoid(
                    |u0| {
                        let a = u0 * u0;
                        let b = (u0 + r) * (u0 + r);
                        trapezoid(
                            |u1| {
                                trapezoid(
                                    |u2| {
                                        let t = u1 * u1 + u2 * u2;
                                        self.rho_sq(a + t) * self.rho_sq(b + t)
                                    },
                                    -1.0,
                                    1.0,
                                    panels,
                                )
                            },
                            -1.0,
                            1.0,
                            panels,
                        )
                    },
                    lo,
                    hi,
                    panels,
                )
            }
        }
    }
}

/// One row of the sampled kernel: fixed offsets on the leading axes, a dense
/// window of weights `dx^d rho_n` along the last axis.
#[derive(Clone, Debug)]
struct KernelRow {
    prefix: [isize; MAX_DIM],
    weights: Vec<f64>,
}

/// The mollifier `rho_n` at scale `n`, together with its grid sampling.
#[derive(Clone, Debug)]
pub struct Mollifier {
    scale_n: u32,
    grid: TorusGrid,
    profile: BumpProfile,
    support_radius: f64,
    c_n_continuum: f64,
    c_n_discrete: f64,
    discrete_mass: f64,
    radius_nodes: usize,
    rows: Vec<KernelRow>,
}

impl Mollifier {
    /// Samples `rho_n` on `grid`. The support must span at least four cells and
    /// fit inside half a period.
    pub fn new(scale_n: u32, grid: TorusGrid) -> Result<Self> {
        if scale_n == 0 {
            return Err(Error::config("n", "mollifier scale must be positive"));
        }
        let d = grid.dim();
        let profile = *BumpProfile::get(d);
        let support_radius = 1.0 / scale_n as f64;
        let dx = grid.dx();
        if support_radius < 4.0 * dx {
            return Err(Error::UnderResolvedMollifier { support_radius, min_radius: 4.0 * dx });
        }
        if support_radius >= grid.side() / 2.0 {
            return Err(Error::MollifierTooWide { support_radius, half_period: grid.side() / 2.0 });
        }
        let n = scale_n as f64;
        let amp = n.powi(d as i32);
        let radius_nodes = (support_radius / dx).floor() as usize;
        let r = radius_nodes as isize;
        let vol = grid.cell_volume();

        let mut rows = Vec::new();
        let mut prefix = [0isize; MAX_DIM];
        let mut push_row = |prefix: [isize; MAX_DIM]| {
            let head: f64 = prefix[..d - 1].iter().map(|&p| (p as f64 * dx).powi(2)).sum();
            let weights: Vec<f64> = (-r..=r)
                .map(|o| {
                    let r2 = head + (o as f64 * dx).powi(2);
                    vol * amp * profile.rho_sq(r2 * n * n)
                })
                .collect();
            if weights.iter().any(|&w| w != 0.0) {
                rows.push(KernelRow { prefix, weights });
            }
        };
        match d {
            1 => push_row(prefix),
            2 => {
                for p0 in -r..=r {
                    prefix[0] = p0;
                    push_row(prefix);
                }
            }
            _ => {
                for p0 in -r..=r {
                    for p1 in -r..=r {
                        prefix[0] = p0;
                        prefix[1] = p1;
                        push_row(prefix);
                    }
                }
            }
        }

        let (mut mass, mut sq) = (0.0, 0.0);
        for w in rows.iter().flat_map(|row| row.weights.iter()) {
            mass += w;
            sq += w * w;
        }
        Ok(Self {
            scale_n,
            grid,
            profile,
            support_radius,
            c_n_continuum: profile.l2_sq * amp,
            c_n_discrete: sq / vol,
            discrete_mass: mass,
            radius_nodes,
            rows,
        })
    }

    pub fn scale_n(&self) -> u32 {
        self.scale_n
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// `||rho||^2`, cached from quadrature.
    pub fn rho_l2_sq(&self) -> f64 {
        self.profile.l2_sq
    }

    /// `C_n = ||rho||^2 n^d`.
    pub fn c_n_continuum(&self) -> f64 {
        self.c_n_continuum
    }

    /// `dx^d sum_j rho_n(x_j)^2` on the working grid.
    pub fn c_n_discrete(&self) -> f64 {
        self.c_n_discrete
    }

    /// `dx^d sum_j rho_n(x_j)`, the grid quadrature of `int rho_n`.
    pub fn discrete_mass(&self) -> f64 {
        self.discrete_mass
    }

    /// `rho_n(x) = n^d rho(n x)` at an arbitrary point of `R^d`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.scale_n as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        n.powi(self.grid.dim() as i32) * self.profile.rho_sq(r2 * n * n)
    }

    /// Periodic convolution `out_i = sum_j dx^d rho_n(x_i - x_j) input_j` for one time slice.
    pub fn convolve(&self, input: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let (d, n) = (g.dim(), g.nodes_per_axis());
        let r = self.radius_nodes;
        let width = n + 2 * r;
        let lines = g.num_nodes() / n;

        // Pad each last-axis line by r nodes on both sides.
        let mut padded = vec![0.0; lines * width];
        for (line, dst) in padded.chunks_mut(width).enumerate() {
            let src = &input[line * n..(line + 1) * n];
            for (j, v) in dst.iter_mut().enumerate() {
                *v = src[(j + n - r % n) % n];
            }
        }

        out.fill(0.0);
        let wrap = |c: usize, p: isize| (c as isize + p).rem_euclid(n as isize) as usize;
        for line in 0..lines {
            let (q0, q1) = (line / n, line % n);
            let dst = &mut out[line * n..(line + 1) * n];
            for row in &self.rows {
                let src_line = match d {
                    1 => 0,
                    2 => wrap(line, row.prefix[0]),
                    _ => wrap(q0, row.prefix[0]) * n + wrap(q1, row.prefix[1]),
                };
                let src = &padded[src_line * width..(src_line + 1) * width];
                for (i, o) in dst.iter_mut().enumerate() {
                    let window = &src[i..i + 2 * r + 1];
                    *o += row.weights.iter().zip(window).map(|(w, v)| w * v).sum::<f64>();
                }
            }
        }
    }
}

/// `h_n(z) = int rho_n(u) rho_n(u + z) du`; depends on `|z|` only and vanishes for `|z| >= 2/n`.
pub fn h_eval(m: &Mollifier, z: &[f64]) -> f64 {
    let n = m.scale_n as f64;
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r >= 2.0 / n {
        return 0.0;
    }
    n.powi(m.grid.dim() as i32) * m.profile.autocorrelation(n * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, n: usize) -> TorusGrid {
        TorusGrid::unit(d, n, 0.1, 4).unwrap()
    }

    #[test]
    fn one_dimensional_constants() {
        // reference values from adaptive quadrature
        let p = BumpProfile::get(1);
        assert!((p.normalization - 2.252283621043585).abs() < 1e-10);
        assert!((p.l2_sq - 0.6751168130096943).abs() < 1e-10);
    }

    #[test]
    fn resolution_constraints() {
        assert!(matches!(Mollifier::new(8, grid(1, 16)), Err(Error::UnderResolvedMollifier { .. })));
        assert!(Mollifier::new(8, grid(1, 32)).is_ok());
        assert!(matches!(Mollifier::new(2, grid(1, 64)), Err(Error::MollifierTooWide { .. })));
        assert!(Mollifier::new(0, grid(1, 64)).is_err());
    }

    #[test]
    fn support_and_symmetry_are_exact() {
        let m = Mollifier::new(8, grid(2, 64)).unwrap();
        assert_eq!(m.eval(&[0.125, 0.0]), 0.0);
        assert_eq!(m.eval(&[0.1, 0.1]), 0.0);
        assert!(m.eval(&[0.1, 0.0]) > 0.0);
        for x in [[0.01, 0.03], [0.05, -0.07], [-0.11, 0.0]] {
            assert_eq!(m.eval(&x), m.eval(&[-x[0], -x[1]]));
        }
    }

    #[test]
    fn grid_mass_close_to_one_when_well_resolved() {
        for (d, n, scale) in [(1, 64, 8), (1, 128, 8), (2, 64, 8), (2, 32, 4), (3, 32, 4)] {
            let g = grid(d, n);
            let m = Mollifier::new(scale, g).unwrap();
            let err = (m.discrete_mass() - 1.0).abs();
            assert!(err <= 2.0 * g.dx() * g.dx(), "d={d} N={n} n={scale}: {err}");
        }
    }

    #[test]
    fn autocorrelation_at_zero_is_l2_norm() {
        for d in 1..=3 {
            let p = BumpProfile::get(d);
            let h0 = p.autocorrelation(0.0);
            assert!((h0 - p.l2_sq).abs() <= 1e-6 * p.l2_sq, "d={d}: {h0} vs {}", p.l2_sq);
        }
    }

    #[test]
    fn h_support_and_symmetry() {
        let m = Mollifier::new(8, grid(1, 64)).unwrap();
        assert_eq!(h_eval(&m, &[0.25]), 0.0);
        assert_eq!(h_eval(&m, &[-0.3]), 0.0);
        assert!(h_eval(&m, &[0.2]) > 0.0);
        for z in [0.01, 0.05, 0.17] {
            assert_eq!(h_eval(&m, &[z]), h_eval(&m, &[-z]));
        }
        assert!((h_eval(&m, &[0.0]) - m.c_n_continuum()).abs() < 1e-6 * m.c_n_continuum());
    }

    #[test]
    fn convolution_of_constant_is_mass() {
        for (d, n, scale) in [(1, 32, 8), (2, 32, 4), (3, 16, 2)] {
            let g = TorusGrid::unit(d, n, 0.1, 4).unwrap();
            let Ok(m) = Mollifier::new(scale, g) else { continue };
            let input = vec![2.0; g.num_nodes()];
            let mut out = vec![0.0; g.num_nodes()];
            m.convolve(&input, &mut out);
            for v in out {
                assert!((v - 2.0 * m.discrete_mass()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_of_delta_samples_kernel() {
        let g = grid(2, 32);
        let m = Mollifier::new(4, g).unwrap();
        let mut input = vec![0.0; g.num_nodes()];
        let src = g.flat_index(&[3, 30]);
        input[src] = 1.0;
        let mut out = vec![0.0; g.num_nodes()];
        m.convolve(&input, &mut out);
        for (i, &v) in out.iter().enumerate() {
            let (xi, xs) = (g.coords(i), g.coords(src));
            let dz = [g.wrap_displacement(xi[0] - xs[0]), g.wrap_displacement(xi[1] - xs[1])];
            let expect = g.cell_volume() * m.eval(&dz);
            assert!((v - expect).abs() < 1e-14, "node {i}: {v} vs {expect}");
        }
    }
}
