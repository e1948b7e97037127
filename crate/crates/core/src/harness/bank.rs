//! Smooth compactly supported vector test functions with closed-form derivatives.
//!
//! Each `φ_i(t, x) = a_i ψ((t - t₀)/r_t) Π_j ψ(s_j / r_x)` with `ψ(s) = exp(-1/(1 - s²))`
//! on `|s| < 1` and `s_j` the minimum-image displacement of `x_j` from `c_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ScalarField, TorusGrid, VectorField, MAX_DIM};

/// `ψ`, `ψ'`, `ψ''` at `s`; all three vanish for `|s| >= 1`.
pub fn bump_derivatives(s: f64) -> (f64, f64, f64) {
    let u = 1.0 - s * s;
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let psi = (-1.0 / u).exp();
    let u2 = u * u;
    let g1 = -2.0 * s / u2;
    let g2 = -2.0 / u2 - 8.0 * s * s / (u2 * u);
    (psi, psi * g1, psi * (g1 * g1 + g2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub t_center: f64,
    pub t_radius: f64,
    pub x_center: Vec<f64>,
    pub x_radius: f64,
    /// Component weights `a_i`, one per spatial dimension.
    pub amplitudes: Vec<f64>,
}

/// Time factor and its derivative.
#[derive(Clone, Copy, Debug)]
pub struct TimeFactor {
    pub value: f64,
    pub derivative: f64,
}

/// Spatial parts of `φ` sampled on a grid: `φ = T(t) A(x)`.
#[derive(Clone, Debug)]
pub struct SpatialSamples {
    /// `A_i(x) = a_i S(x)`
    pub field: VectorField,
    /// `ΔA_i`
    pub laplacian: VectorField,
    /// `∇·A`
    pub divergence: ScalarField,
}

impl TestFunction {
    /// Checks the support lies strictly inside `(0, T)` and spans less than one period.
    pub fn validate(&self, grid: &TorusGrid) -> Result<()> {
        let bad = |why: String| Err(Error::SupportViolation(format!("{}: {why}", self.id)));
        let (t, l) = (grid.horizon(), grid.side());
        let finite = [self.t_center, self.t_radius, self.x_radius]
            .iter()
            .chain(&self.x_center)
            .chain(&self.amplitudes)
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        if self.t_radius <= 0.0 || self.x_radius <= 0.0 {
            return bad("radii must be positive".into());
        }
        if self.t_center - self.t_radius <= 0.0 || self.t_center + self.t_radius >= t {
            return bad(format!(
                "time support [{}, {}] not inside (0, {t})",
                self.t_center - self.t_radius,
                self.t_center + self.t_radius
            ));
        }
        if 2.0 * self.x_radius >= l {
            return bad(format!("spatial support width {} >= period {l}", 2.0 * self.x_radius));
        }
        if self.x_center.len() != grid.dim() || self.amplitudes.len() != grid.dim() {
            return bad(format!("needs {} center coordinates and amplitudes", grid.dim()));
        }
        Ok(())
    }

    pub fn time_factor(&self, t: f64) -> TimeFactor {
        let (v, d1, _) = bump_derivatives((t - self.t_center) / self.t_radius);
        TimeFactor { value: v, derivative: d1 / self.t_radius }
    }

    /// Returns `S(x)`, writes `∂_j S` into `grad` and `∂²_j S` into `second`.
    fn spatial(&self, grid: &TorusGrid, x: &[f64], grad: &mut [f64], second: &mut [f64]) -> f64 {
        let d = x.len();
        let mut vals = [(0.0, 0.0, 0.0); MAX_DIM];
        for j in 0..d {
            let s = grid.wrap_displacement(x[j] - self.x_center[j]) / self.x_radius;
            let (p, p1, p2) = bump_derivatives(s);
            vals[j] = (p, p1 / self.x_radius, p2 / (self.x_radius * self.x_radius));
        }
        let mut prod = 1.0;
        for j in 0..d {
            let others: f64 = (0..d).filter(|&l| l != j).map(|l| vals[l].0).product();
            grad[j] = vals[j].1 * others;
            second[j] = vals[j].2 * others;
            prod *= vals[j].0;
        }
        prod
    }

    /// `φ(t, x)` into `out`.
    pub fn eval(&self, grid: &TorusGrid, t: f64, x: &[f64], out: &mut [f64]) {
        let (mut g, mut s2) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        let s = self.spatial(grid, x, &mut g, &mut s2) * self.time_factor(t).value;
        for (o, a) in out.iter_mut().zip(&self.amplitudes) {
            *o = a * s;
        }
    }

    /// `∂_t φ(t, x)` into `out`.
    pub fn eval_dt(&self, grid: &TorusGrid, t: f64, x: &[f64], out: &mut [f64]) {
        let (mut g, mut s2) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        let s = self.spatial(grid, x, &mut g, &mut s2) * self.time_factor(t).derivative;
        for (o, a) in out.iter_mut().zip(&self.amplitudes) {
            *o = a * s;
        }
    }

    /// `Δφ(t, x)` into `out`.
    pub fn eval_laplacian(&self, grid: &TorusGrid, t: f64, x: &[f64], out: &mut [f64]) {
        let (mut g, mut s2) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        self.spatial(grid, x, &mut g, &mut s2);
        let lap: f64 = s2[..x.len()].iter().sum::<f64>() * self.time_factor(t).value;
        for (o, a) in out.iter_mut().zip(&self.amplitudes) {
            *o = a * lap;
        }
    }

    /// `∇·φ(t, x)`.
    pub fn eval_divergence(&self, grid: &TorusGrid, t: f64, x: &[f64]) -> f64 {
        let (mut g, mut s2) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        self.spatial(grid, x, &mut g, &mut s2);
        let div: f64 = self.amplitudes.iter().zip(&g).map(|(a, gj)| a * gj).sum();
        div * self.time_factor(t).value
    }

    /// Samples the time-independent factor and its analytic derivatives.
    pub fn sample_spatial(&self, grid: &TorusGrid) -> Result<SpatialSamples> {
        self.validate(grid)?;
        let d = grid.dim();
        let len = grid.num_nodes();
        let (mut a, mut lap, mut div) = (vec![0.0; d * len], vec![0.0; d * len], vec![0.0; len]);
        let (mut g, mut s2) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        for i in 0..len {
            let x = grid.coords(i);
            let s = self.spatial(grid, &x[..d], &mut g, &mut s2);
            let ls: f64 = s2[..d].iter().sum();
            for c in 0..d {
                let amp = self.amplitudes[c];
                a[c * len + i] = amp * s;
                lap[c * len + i] = amp * ls;
                div[i] += amp * g[c];
            }
        }
        Ok(SpatialSamples {
            field: VectorField::new(*grid, a)?,
            laplacian: VectorField::new(*grid, lap)?,
            divergence: ScalarField::new(*grid, div)?,
        })
    }
}

/// Which test functions to use: the default bank (unless disabled) plus extras.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankSpec {
    pub include_default: bool,
    pub extra: Vec<TestFunction>,
}

impl Default for BankSpec {
    fn default() -> Self {
        Self { include_default: true, extra: Vec::new() }
    }
}

/// The six default functions for a grid, varying center, radii and components.
pub fn default_bank(grid: &TorusGrid) -> Vec<TestFunction> {
    let (d, t, l) = (grid.dim(), grid.horizon(), grid.side());
    // (t0/T, rt/T, c/L, rx/L, amplitudes by component)
    let table: [(f64, f64, f64, f64, [f64; MAX_DIM]); 6] = [
        (0.50, 0.40, 0.50, 0.25, [1.0, 0.0, 0.0]),
        (0.40, 0.30, 0.30, 0.20, [0.0, 1.0, 0.0]),
        (0.60, 0.30, 0.70, 0.30, [-0.5, 0.5, 1.0]),
        (0.50, 0.45, 0.00, 0.15, [1.0, 1.0, 1.0]),
        (0.35, 0.25, 0.55, 0.35, [2.0, -1.0, 0.5]),
        (0.65, 0.25, 0.15, 0.18, [1.0, 0.5, -0.5]),
    ];
    table
        .iter()
        .enumerate()
        .map(|(j, &(tc, tr, c, r, amps))| {
            let mut amplitudes = amps[..d].to_vec();
            if amplitudes.iter().all(|&a| a == 0.0) {
                amplitudes[0] = 1.0;
            }
            TestFunction {
                id: format!("phi{j}"),
                t_center: tc * t,
                t_radius: tr * t,
                x_center: (0..d).map(|a| ((c + 0.1 * a as f64) % 1.0) * l).collect(),
                x_radius: r * l,
                amplitudes,
            }
        })
        .collect()
}

/// Deterministic bank for `grid`; every member is support-checked.
pub fn build_bank(spec: &BankSpec, grid: &TorusGrid) -> Result<Vec<TestFunction>> {
    let mut bank = if spec.include_default { default_bank(grid) } else { Vec::new() };
    bank.extend(spec.extra.iter().cloned());
    for phi in &bank {
        phi.validate(grid)?;
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize) -> TorusGrid {
        TorusGrid::unit(d, 32, 0.1, 100).unwrap()
    }

    #[test]
    fn default_bank_has_six_valid_members() {
        for d in 1..=3 {
            let bank = build_bank(&BankSpec::default(), &grid(d)).unwrap();
            assert_eq!(bank.len(), 6);
            let ids: std::collections::BTreeSet<_> = bank.iter().map(|p| p.id.clone()).collect();
            assert_eq!(ids.len(), 6);
        }
    }

    #[test]
    fn time_radius_reaching_boundary_is_rejected() {
        let g = grid(1);
        let phi = TestFunction {
            id: "wide".into(),
            t_center: 0.05,
            t_radius: 0.05,
            x_center: vec![0.5],
            x_radius: 0.1,
            amplitudes: vec![1.0],
        };
        let spec = BankSpec { include_default: false, extra: vec![phi.clone()] };
        assert!(matches!(build_bank(&spec, &g), Err(Error::SupportViolation(_))));
        let wide_x = TestFunction { t_radius: 0.01, x_radius: 0.5, ..phi };
        assert!(wide_x.validate(&g).is_err());
    }

    #[test]
    fn vanishes_outside_support() {
        let g = grid(2);
        let mut out = [1.0; 2];
        for phi in default_bank(&g) {
            phi.eval(&g, phi.t_center + phi.t_radius, &phi.x_center, &mut out);
            assert_eq!(out, [0.0, 0.0]);
            let x = [phi.x_center[0] + phi.x_radius * 1.01, phi.x_center[1]];
            phi.eval(&g, phi.t_center, &x, &mut out);
            assert_eq!(out, [0.0, 0.0]);
            assert_eq!(phi.eval_divergence(&g, 0.0, &phi.x_center), 0.0);
        }
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let h = 1e-6;
        for s in [-0.9, -0.5, 0.0, 0.3, 0.77] {
            let (_, d1, d2) = bump_derivatives(s);
            let fd1 = (bump_derivatives(s + h).0 - bump_derivatives(s - h).0) / (2.0 * h);
            let fd2 = (bump_derivatives(s + h).1 - bump_derivatives(s - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-6 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn analytic_derivatives_match_difference_quotients() {
        let g = TorusGrid::unit(3, 32, 0.1, 100).unwrap();
        let h = 1e-5;
        for phi in default_bank(&g) {
            let t = phi.t_center + 0.3 * phi.t_radius;
            let x = [phi.x_center[0] + 0.2 * phi.x_radius, phi.x_center[1] - 0.1 * phi.x_radius, phi.x_center[2]];
            let (mut p, mut m, mut c, mut out) = ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]);
            phi.eval(&g, t + h, &x, &mut p);
            phi.eval(&g, t - h, &x, &mut m);
            phi.eval_dt(&g, t, &x, &mut out);
            for i in 0..3 {
                let fd = (p[i] - m[i]) / (2.0 * h);
                assert!((fd - out[i]).abs() < 1e-5 * (1.0 + out[i].abs()), "{} dt", phi.id);
            }
            phi.eval(&g, t, &x, &mut c);
            let mut lap_fd = [0.0; 3];
            let mut div_fd = 0.0;
            for j in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[j] += h;
                xm[j] -= h;
                phi.eval(&g, t, &xp, &mut p);
                phi.eval(&g, t, &xm, &mut m);
                for i in 0..3 {
                    lap_fd[i] += (p[i] - 2.0 * c[i] + m[i]) / (h * h);
                }
                div_fd += (p[j] - m[j]) / (2.0 * h);
            }
            phi.eval_laplacian(&g, t, &x, &mut out);
            for i in 0..3 {
                assert!((lap_fd[i] - out[i]).abs() < 1e-3 * (1.0 + out[i].abs()), "{} lap", phi.id);
            }
            let div = phi.eval_divergence(&g, t, &x);
            assert!((div_fd - div).abs() < 1e-5 * (1.0 + div.abs()), "{} div", phi.id);
        }
    }

    #[test]
    fn spatial_samples_factorize() {
        let g = grid(2);
        let phi = &default_bank(&g)[2];
        let samples = phi.sample_spatial(&g).unwrap();
        let t = phi.t_center + 0.1 * phi.t_radius;
        let tf = phi.time_factor(t).value;
        let mut out = [0.0; 2];
        for i in (0..g.num_nodes()).step_by(37) {
            let x = g.coords(i);
            phi.eval(&g, t, &x[..2], &mut out);
            for (c, v) in out.iter().enumerate() {
                assert!((v - tf * samples.field.component(c)[i]).abs() < 1e-14);
            }
            let div = phi.eval_divergence(&g, t, &x[..2]);
            assert!((div - tf * samples.divergence.values()[i]).abs() < 1e-12);
        }
    }
}
