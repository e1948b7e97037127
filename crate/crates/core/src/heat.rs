//! Itô scheme for the regularized stochastic heat equation
//! `dZ = ΔZ dt + Z dW^n`, `Z(0) = exp(f)`.
//!
//! One step is an explicit heat update followed by a geometric noise factor,
//!
//! ```text
//! Z_{k+1} = (Z_k + dt Δ_h Z_k) · exp(dW^n_k - ½ λ² c_n dt),
//! ```
//!
//! which is a convex combination of positive values times a positive
//! multiplier whenever `dt <= dx² / 2d`, and whose multiplier has mean one.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binfmt;
use crate::error::{Error, Result};
use crate::lattice::{laplacian_raw, ScalarField, TorusGrid};
use crate::noise::{MollifiedNoise, Regularization};

/// Presets for the initial potential `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    /// `a Σ_j cos(2π k x_j / L)`
    Cosine { amplitude: f64, wavenumber: u32 },
    /// `a exp(-Σ_j s_j² / 2w²)` with the periodic distance `s_j = (L/π) sin(π (x_j - c_j) / L)`.
    GaussianBump { amplitude: f64, width: f64, center: Vec<f64> },
}

impl InitialKind {
    pub fn eval(&self, grid: &TorusGrid, x: &[f64]) -> f64 {
        let l = grid.side();
        match self {
            InitialKind::Zero => 0.0,
            InitialKind::Cosine { amplitude, wavenumber } => {
                let k = 2.0 * std::f64::consts::PI * *wavenumber as f64 / l;
                amplitude * x.iter().map(|xj| (k * xj).cos()).sum::<f64>()
            }
            InitialKind::GaussianBump { amplitude, width, center } => {
                let s2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(xj, cj)| (l / std::f64::consts::PI * (std::f64::consts::PI * (xj - cj) / l).sin()).powi(2))
                    .sum();
                amplitude * (-s2 / (2.0 * width * width)).exp()
            }
        }
    }

    /// Analytic `∂f/∂x_axis`.
    pub fn partial(&self, grid: &TorusGrid, x: &[f64], axis: usize) -> f64 {
        let l = grid.side();
        let pi = std::f64::consts::PI;
        match self {
            InitialKind::Zero => 0.0,
            InitialKind::Cosine { amplitude, wavenumber } => {
                let k = 2.0 * pi * *wavenumber as f64 / l;
                -amplitude * k * (k * x[axis]).sin()
            }
            InitialKind::GaussianBump { width, center, .. } => {
                let arg = pi * (x[axis] - center[axis]) / l;
                // d/dx of s² = (L/π)² sin²(arg) is (L/π) sin(2 arg)
                let ds2 = l / pi * (2.0 * arg).sin();
                self.eval(grid, x) * (-ds2 / (2.0 * width * width))
            }
        }
    }

    pub fn validate(&self, grid: &TorusGrid) -> Result<()> {
        match self {
            InitialKind::Zero => Ok(()),
            InitialKind::Cosine { amplitude, .. } if !amplitude.is_finite() => {
                Err(Error::config("f.amplitude", "must be finite"))
            }
            InitialKind::Cosine { .. } => Ok(()),
            InitialKind::GaussianBump { amplitude, width, center } => {
                if !amplitude.is_finite() {
                    return Err(Error::config("f.amplitude", "must be finite"));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::config("f.width", "must be positive"));
                }
                if center.len() != grid.dim() {
                    return Err(Error::config("f.center", format!("needs {} coordinates", grid.dim())));
                }
                Ok(())
            }
        }
    }
}

/// `f` together with its grid samples.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    kind: InitialKind,
    values: ScalarField,
}

impl InitialData {
    pub fn new(kind: InitialKind, grid: TorusGrid) -> Result<Self> {
        kind.validate(&grid)?;
        let values = ScalarField::from_fn(grid, |x| kind.eval(&grid, x))?;
        Ok(Self { kind, values })
    }

    pub fn zero(grid: TorusGrid) -> Self {
        Self { kind: InitialKind::Zero, values: ScalarField::zeros(grid) }
    }

    pub fn kind(&self) -> &InitialKind {
        &self.kind
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    /// `exp(f)`, the heat-equation initial condition.
    pub fn exp(&self) -> ScalarField {
        self.values.map(f64::exp).expect("exp of a bounded field is finite")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeMeta {
    pub stability_margin: f64,
    pub lambda: f64,
    pub c_n_discrete: f64,
    pub seed: u64,
    pub scale_n: Option<u32>,
    #[serde(skip)]
    pub noise_fingerprint: u64,
}

/// Trajectory `Z_n(t_k, ·)` for `k = 0..=M`.
#[derive(Clone, Debug)]
pub struct HeatSolution {
    grid: TorusGrid,
    trajectory: Vec<ScalarField>,
    meta: SchemeMeta,
}

impl HeatSolution {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn trajectory(&self) -> &[ScalarField] {
        &self.trajectory
    }

    pub fn meta(&self) -> &SchemeMeta {
        &self.meta
    }

    pub fn terminal(&self) -> &ScalarField {
        self.trajectory.last().expect("trajectory has M + 1 >= 3 entries")
    }

    /// Writes `k, t, i_0[, i_1, i_2], Z` rows, one per node and time node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let d = self.grid.dim();
        let mut out = String::from("k,t");
        for a in 0..d {
            write!(out, ",i{a}").unwrap();
        }
        out.push_str(",Z\n");
        for (k, z) in self.trajectory.iter().enumerate() {
            let t = self.grid.time(k);
            for (i, v) in z.values().iter().enumerate() {
                write!(out, "{k},{t:e}").unwrap();
                for c in &self.grid.multi_index(i)[..d] {
                    write!(out, ",{c}").unwrap();
                }
                writeln!(out, ",{v:e}").unwrap();
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Binary snapshot in the noise-file layout, with `M + 1` time slices.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let header = binfmt::Header { grid: self.grid, seed: self.meta.seed, lambda: self.meta.lambda };
        let payload: Vec<f64> = self.trajectory.iter().flat_map(|z| z.values().iter().copied()).collect();
        binfmt::write(path, &header, &payload)
    }

    pub fn read_binary(path: &Path) -> Result<(binfmt::Header, Vec<ScalarField>)> {
        let (header, payload) = binfmt::read(path, |g| g.steps() + 1)?;
        let len = header.grid.num_nodes();
        let fields = payload
            .chunks(len)
            .map(|c| ScalarField::new(header.grid, c.to_vec()))
            .collect::<Result<_>>()?;
        Ok((header, fields))
    }
}

/// `1 - 2d dt/dx²`; negative means the configuration is rejected.
pub fn stability_check(grid: &TorusGrid) -> f64 {
    grid.stability_margin()
}

fn require_stable(grid: &TorusGrid) -> Result<()> {
    let margin = stability_check(grid);
    if margin < 0.0 {
        return Err(Error::StabilityViolation { margin });
    }
    Ok(())
}

/// Core update; `lap` is scratch space.
fn step_into(
    grid: &TorusGrid,
    z: &[f64],
    increments: &[f64],
    compensator_rate: f64,
    step: usize,
    lap: &mut [f64],
) -> Result<Vec<f64>> {
    laplacian_raw(grid, z, lap);
    let dt = grid.dt();
    let drift = 0.5 * compensator_rate * dt;
    let mut out = Vec::with_capacity(z.len());
    for (i, ((&zi, &li), &w)) in z.iter().zip(lap.iter()).zip(increments).enumerate() {
        let v = (zi + dt * li) * (w - drift).exp();
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositive { step: step + 1, node: i, value: v });
        }
        out.push(v);
    }
    Ok(out)
}

fn require_positive(z: &[f64], step: usize) -> Result<()> {
    match z.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(node) => Err(Error::NonPositive { step, node, value: z[node] }),
        None => Ok(()),
    }
}

/// One step of the scheme. `compensator_rate` is `λ² c_n`.
pub fn heat_step(z: &ScalarField, increments: &[f64], compensator_rate: f64) -> Result<ScalarField> {
    let grid = *z.grid();
    require_stable(&grid)?;
    if increments.len() != grid.num_nodes() {
        return Err(Error::LengthMismatch { expected: grid.num_nodes(), found: increments.len() });
    }
    require_positive(z.values(), 0)?;
    let mut lap = vec![0.0; grid.num_nodes()];
    let out = step_into(&grid, z.values(), increments, compensator_rate, 0, &mut lap)?;
    Ok(ScalarField::from_vec_unchecked(grid, out))
}

/// Solves from `exp(f)`.
pub fn solve_heat(grid: &TorusGrid, noise: &MollifiedNoise, f: &InitialData) -> Result<HeatSolution> {
    if f.values().grid() != grid {
        return Err(Error::ShapeMismatch("initial data sampled on a different grid".into()));
    }
    solve_heat_from(grid, noise, f.exp())
}

/// Solves from an arbitrary positive initial field `z0`, bypassing `exp(f)`.
pub fn solve_heat_from(grid: &TorusGrid, noise: &MollifiedNoise, z0: ScalarField) -> Result<HeatSolution> {
    if noise.grid() != grid || z0.grid() != grid {
        return Err(Error::ShapeMismatch(format!("solver grid {grid:?} does not match its inputs")));
    }
    require_stable(grid)?;
    require_positive(z0.values(), 0)?;
    let rate = noise.compensator_rate();
    let mut lap = vec![0.0; grid.num_nodes()];
    let mut trajectory = Vec::with_capacity(grid.steps() + 1);
    trajectory.push(z0);
    for k in 0..grid.steps() {
        let next = step_into(grid, trajectory[k].values(), noise.slice(k), rate, k, &mut lap)?;
        trajectory.push(ScalarField::from_vec_unchecked(*grid, next));
    }
    let meta = SchemeMeta {
        stability_margin: stability_check(grid),
        lambda: noise.lambda(),
        c_n_discrete: noise.c_n_discrete(),
        seed: noise.seed(),
        scale_n: match noise.regularization() {
            Regularization::Bump { scale_n } => Some(scale_n),
            Regularization::GridDelta => None,
        },
        noise_fingerprint: noise.fingerprint(),
    };
    Ok(HeatSolution { grid: *grid, trajectory, meta })
}
