//! The Cole-Hopf sequence `U_n = ∇ log Z_n` and the residuals that check it.
//!
//! With `H = log Z`, the Itô formula applied to the heat scheme gives the
//! KPZ-form increment
//!
//! ```text
//! dH = (ΔH + |∇H|²) dt + dW^n - ½ λ² c_n dt,
//! ```
//!
//! and taking the gradient and testing against `φ` gives the weak Burgers
//! identity `⟨L_B U_n, φ⟩ = -∫∫ ∇·φ dW^n dx`. Both are checked per
//! realization on the lattice.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::bank::TestFunction;
use crate::heat::{HeatSolution, SchemeMeta};
use crate::lattice::{
    centered_diff_raw, divergence, gradient, inner_space, laplacian, laplacian_raw, ScalarField, TorusGrid,
    VectorField,
};
use crate::noise::mollifier::BumpProfile;
use crate::noise::{MollifiedNoise, WhiteNoiseRealization};

/// `H[k] = log Z[k]` and `U[k] = ∇_h H[k]` for `k = 0..=M`.
#[derive(Clone, Debug)]
pub struct ColeHopfTrajectory {
    grid: TorusGrid,
    h: Vec<ScalarField>,
    u: Vec<VectorField>,
    source: SchemeMeta,
}

impl ColeHopfTrajectory {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn potential(&self) -> &[ScalarField] {
        &self.h
    }

    pub fn velocity(&self) -> &[VectorField] {
        &self.u
    }

    pub fn source(&self) -> &SchemeMeta {
        &self.source
    }
}

pub fn cole_hopf(z: &HeatSolution) -> Result<ColeHopfTrajectory> {
    let mut h = Vec::with_capacity(z.trajectory().len());
    let mut u = Vec::with_capacity(z.trajectory().len());
    for (step, zk) in z.trajectory().iter().enumerate() {
        if let Some(node) = zk.values().iter().position(|&v| v <= 0.0) {
            return Err(Error::NonPositive { step, node, value: zk.values()[node] });
        }
        let hk = zk.map(f64::ln)?;
        u.push(gradient(&hk));
        h.push(hk);
    }
    Ok(ColeHopfTrajectory { grid: *z.grid(), h, u, source: z.meta().clone() })
}

/// `max |Δ_h Z / Z - (Δ_h H + |∇_h H|²)|` for `H = log Z`.
pub fn laplacian_ratio_gap(z: &ScalarField, h: &ScalarField) -> f64 {
    let lz = laplacian(z);
    let lh = laplacian(h);
    let g2 = gradient(h).norm_sq();
    z.values()
        .iter()
        .zip(lz.values())
        .zip(lh.values().iter().zip(g2.values()))
        .fold(0.0, |m, ((zi, lzi), (lhi, gi))| m.max((lzi / zi - lhi - gi).abs()))
}

fn check_realization(traj: &ColeHopfTrajectory, noise: &MollifiedNoise) -> Result<()> {
    if noise.grid() != &traj.grid || noise.fingerprint() != traj.source.noise_fingerprint {
        return Err(Error::MismatchedRealization);
    }
    Ok(())
}

/// Per-step max-norms of
/// `r_k = H_{k+1} - H_k - dt (Δ_h H_k + |∇_h H_k|²) - dW^n_k + ½ λ² c_n dt`.
pub fn kpz_residual(traj: &ColeHopfTrajectory, noise: &MollifiedNoise) -> Result<Vec<f64>> {
    check_realization(traj, noise)?;
    let g = &traj.grid;
    let (len, dt) = (g.num_nodes(), g.dt());
    let half_comp = 0.5 * noise.compensator_rate() * dt;
    let mut lap = vec![0.0; len];
    let mut grad = vec![0.0; len];
    let mut out = Vec::with_capacity(g.steps());
    for k in 0..g.steps() {
        let (hk, hk1) = (traj.h[k].values(), traj.h[k + 1].values());
        laplacian_raw(g, hk, &mut lap);
        let mut grad_sq = vec![0.0; len];
        for axis in 0..g.dim() {
            centered_diff_raw(g, axis, hk, &mut grad);
            grad_sq.iter_mut().zip(&grad).for_each(|(s, v)| *s += v * v);
        }
        let w = noise.slice(k);
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let r = hk1[i] - hk[i] - dt * (lap[i] + grad_sq[i]) - w[i] + half_comp;
            worst = worst.max(r.abs());
        }
        out.push(worst);
    }
    Ok(out)
}

/// One row of the weak-identity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakResidualReport {
    pub phi_id: String,
    /// `⟨L_B U_n, φ⟩` with all derivatives moved onto `φ`.
    pub lhs: f64,
    /// `-Σ ∇·φ dW^n dx^d`
    pub rhs: f64,
    pub gap: f64,
    /// `-Σ ∇·φ dW dx^d` against the unmollified increments.
    pub limit_pairing: f64,
    pub d: usize,
    pub n_nodes: usize,
    pub m_steps: usize,
    pub scale_n: Option<u32>,
    pub seed: u64,
    pub lambda: f64,
}

impl WeakResidualReport {
    /// `gap / |rhs|`.
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.rhs.abs()
    }
}

/// Evaluates both sides of the weak Burgers identity for one test function.
///
/// Left side: `-⟨U, ∂_tφ⟩ - ⟨U, Δφ⟩ + ⟨|U|², ∇·φ⟩` summed over left time
/// endpoints with analytic `φ` derivatives. Right side: the Itô sum of `∇·φ`
/// against the mollified increments.
pub fn weak_residual(
    traj: &ColeHopfTrajectory,
    phi: &TestFunction,
    noise: &MollifiedNoise,
    base: &WhiteNoiseRealization,
) -> Result<WeakResidualReport> {
    check_realization(traj, noise)?;
    if base.grid() != &traj.grid || base.seed() != noise.seed() {
        return Err(Error::MismatchedRealization);
    }
    let g = &traj.grid;
    let spatial = phi.sample_spatial(g)?;
    let (dt, vol) = (g.dt(), g.cell_volume());
    let div = spatial.divergence.values();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let (mut lhs, mut rhs, mut limit) = (0.0, 0.0, 0.0);
    for k in 0..g.steps() {
        let tf = phi.time_factor(g.time(k));
        if tf.value == 0.0 && tf.derivative == 0.0 {
            continue;
        }
        let u = &traj.u[k];
        let u_dot_a = inner_space(u, &spatial.field)?;
        let u_dot_lap = inner_space(u, &spatial.laplacian)?;
        let u2_div = inner_space(&u.norm_sq(), &spatial.divergence)?;
        lhs += dt * (-tf.derivative * u_dot_a - tf.value * u_dot_lap + tf.value * u2_div);
        rhs -= tf.value * vol * dot(noise.slice(k), div);
        limit -= tf.value * vol * dot(base.slice(k), div);
    }
    Ok(WeakResidualReport {
        phi_id: phi.id.clone(),
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        limit_pairing: limit,
        d: g.dim(),
        n_nodes: g.nodes_per_axis(),
        m_steps: g.steps(),
        scale_n: traj.source.scale_n,
        seed: traj.source.seed,
        lambda: traj.source.lambda,
    })
}

/// `⟨U, φ⟩_st = Σ_k dt ⟨U[k], φ(t_k)⟩` over left endpoints.
pub fn pair_velocity(traj: &ColeHopfTrajectory, phi: &TestFunction) -> Result<f64> {
    let g = &traj.grid;
    let spatial = phi.sample_spatial(g)?;
    let mut total = 0.0;
    for k in 0..g.steps() {
        let tf = phi.time_factor(g.time(k)).value;
        if tf != 0.0 {
            total += tf * inner_space(&traj.u[k], &spatial.field)?;
        }
    }
    Ok(g.dt() * total)
}

/// `⟨U_n, φ⟩_st` for each trajectory of a 1-D refinement study in `n`.
pub fn distributional_limit_1d(trajs: &[ColeHopfTrajectory], phi: &TestFunction) -> Result<Vec<f64>> {
    let Some(first) = trajs.first() else {
        return Ok(Vec::new());
    };
    if first.grid.dim() != 1 {
        return Err(Error::Dimension(format!("distributional limit needs d = 1, got {}", first.grid.dim())));
    }
    if trajs.iter().any(|t| t.grid != first.grid || t.source.seed != first.source.seed) {
        return Err(Error::MismatchedRealization);
    }
    trajs.iter().map(|t| pair_velocity(t, phi)).collect()
}

/// Successive differences `|v_{j+1} - v_j|`.
pub fn cauchy_gaps(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

/// Strict delta net `ρ_ε(t) = ρ₀(t/ε - 1) / ε`, supported in `(0, 2ε)`.
pub fn delta_net(eps: f64, t: f64) -> f64 {
    let s = t / eps - 1.0;
    BumpProfile::get(1).rho_sq(s * s) / eps
}

fn check_eps(grid: &TorusGrid, eps: f64) -> Result<()> {
    if !(eps > 0.0 && 2.0 * eps < grid.horizon()) {
        return Err(Error::EpsTooLarge { eps, horizon: grid.horizon() });
    }
    Ok(())
}

/// `s(ε) = Σ_k ρ_ε(t_k) dt ⟨U[k], φ_x⟩` with `φ_x` the spatial factor of `phi`.
pub fn lojasiewicz_section(traj: &ColeHopfTrajectory, phi_x: &TestFunction, eps: f64) -> Result<f64> {
    let g = &traj.grid;
    check_eps(g, eps)?;
    let field = phi_x.sample_spatial(g)?.field;
    let mut s = 0.0;
    for k in 0..g.steps() {
        let w = delta_net(eps, g.time(k));
        if w != 0.0 {
            s += w * g.dt() * inner_space(&traj.u[k], &field)?;
        }
    }
    Ok(s)
}

/// Same section computed as `-Σ_k ρ_ε(t_k) dt ⟨H[k], ∇_h·φ_x⟩`.
pub fn lojasiewicz_section_dual(traj: &ColeHopfTrajectory, phi_x: &TestFunction, eps: f64) -> Result<f64> {
    let g = &traj.grid;
    check_eps(g, eps)?;
    let div = divergence(&phi_x.sample_spatial(g)?.field);
    let mut s = 0.0;
    for k in 0..g.steps() {
        let w = delta_net(eps, g.time(k));
        if w != 0.0 {
            s -= w * g.dt() * inner_space(&traj.h[k], &div)?;
        }
    }
    Ok(s)
}
