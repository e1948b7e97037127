//! Feynman-Kac Monte Carlo estimator of `Z_n(t, x)` for a frozen noise
//! realization, used as an independent check on the finite-difference solver.
//!
//! Paths are Brownian with generator `Δ` (variance `2 dt` per axis and step).
//! Along a path the exponent collects the mollified increments in reversed
//! time: at path time `s_j = j dt` the walker sits at `x + B_{s_j}` and picks up
//! `dW^n` of step `K - 1 - j`, where `t = K dt`. Noise is read at the nearest
//! node.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::report::fmt_num;
use crate::heat::InitialData;
use crate::lattice::{TorusGrid, MAX_DIM};
use crate::noise::rng::{stream, Domain};
use crate::noise::MollifiedNoise;

/// Whether the exponent carries the `-½ λ² c_n t` compensator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionMode {
    ItoCompensated,
    Uncompensated,
}

impl CorrectionMode {
    pub const ALL: [CorrectionMode; 2] = [CorrectionMode::ItoCompensated, CorrectionMode::Uncompensated];

    pub fn as_str(self) -> &'static str {
        match self {
            CorrectionMode::ItoCompensated => "ito-compensated",
            CorrectionMode::Uncompensated => "uncompensated",
        }
    }
}

impl std::fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Monte Carlo settings. `path_seed` keys the Brownian streams, which never
/// overlap the noise streams even when the two seeds coincide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FkSettings {
    pub num_paths: usize,
    pub mode: CorrectionMode,
    pub path_seed: u64,
}

pub const MIN_PATHS: usize = 100;

const PATH_BLOCK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FkEstimate {
    pub t: f64,
    pub x: Vec<f64>,
    pub num_paths: usize,
    pub mean: f64,
    pub stderr: f64,
    pub correction_mode: CorrectionMode,
}

/// One Brownian path sampled at `t_k = k dt`, `k = 0..=M`.
#[derive(Clone, Debug)]
pub struct BrownianPath {
    dim: usize,
    displacement: Vec<[f64; MAX_DIM]>,
    side: f64,
}

impl BrownianPath {
    /// Unwrapped displacement `B_{t_k}`; starts at exactly 0.
    pub fn displacement(&self, k: usize) -> &[f64] {
        &self.displacement[k][..self.dim]
    }

    /// Position on the torus, in `[0, L)^d`.
    pub fn position(&self, k: usize) -> Vec<f64> {
        self.displacement(k).iter().map(|b| b.rem_euclid(self.side)).collect()
    }

    pub fn len(&self) -> usize {
        self.displacement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacement.is_empty()
    }
}

/// Path number `index` of the Brownian family keyed by `seed`.
pub fn brownian_path(grid: &TorusGrid, seed: u64, index: u64) -> BrownianPath {
    let d = grid.dim();
    let sigma = (2.0 * grid.dt()).sqrt();
    let mut rng = stream(seed, Domain::Brownian, index);
    let mut b = [0.0; MAX_DIM];
    let mut displacement = Vec::with_capacity(grid.steps() + 1);
    displacement.push(b);
    for _ in 0..grid.steps() {
        for ba in &mut b[..d] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *ba += sigma * z;
        }
        displacement.push(b);
    }
    BrownianPath { dim: d, displacement, side: grid.side() }
}

fn time_index(grid: &TorusGrid, t: f64) -> Result<usize> {
    let k = t / grid.dt();
    let r = k.round();
    if !(r >= 0.0 && r <= grid.steps() as f64 && (k - r).abs() <= 1e-9 * r.max(1.0)) {
        return Err(Error::OffGrid(format!("t = {t} is not a time node (dt = {})", grid.dt())));
    }
    Ok(r as usize)
}

fn node_position(grid: &TorusGrid, x: &[f64]) -> Result<[f64; MAX_DIM]> {
    if x.len() != grid.dim() {
        return Err(Error::OffGrid(format!("{}-component point on a {}-d grid", x.len(), grid.dim())));
    }
    let mut out = [0.0; MAX_DIM];
    for (a, &xa) in x.iter().enumerate() {
        let c = xa / grid.dx();
        let r = c.round();
        if !(r >= 0.0 && r < grid.nodes_per_axis() as f64 && (c - r).abs() <= 1e-9 * r.max(1.0)) {
            return Err(Error::OffGrid(format!("x = {x:?} is not a grid node (dx = {})", grid.dx())));
        }
        out[a] = r * grid.dx();
    }
    Ok(out)
}

/// `x.rem_euclid(side)` for `x` within one period of `[0, side)`; both
/// branches are exact, so this matches `rem_euclid` bit for bit.
#[inline]
fn wrap(x: f64, side: f64) -> f64 {
    if x >= side {
        x - side
    } else if x < 0.0 {
        x + side
    } else {
        x
    }
}

/// Nearest node of a point already in `[0, L)^d`.
#[inline]
fn wrapped_node(x: &[f64], dx: f64, n: usize) -> usize {
    x.iter().fold(0, |idx, &xa| {
        let c = (xa / dx).round() as usize;
        idx * n + if c >= n { c - n } else { c }
    })
}

/// Order-fixed pairwise summation, so means do not depend on scheduling.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Estimate from `Z(0) = exp(f)`, with `f` evaluated off-grid in closed form.
pub fn fk_estimate(noise: &MollifiedNoise, f: &InitialData, t: f64, x: &[f64], settings: &FkSettings) -> Result<FkEstimate> {
    let grid = *noise.grid();
    let kind = f.kind().clone();
    fk_estimate_with(noise, move |y: &[f64]| kind.eval(&grid, y).exp(), t, x, settings)
}

/// Estimate for an arbitrary initial field `z0`, evaluated at wrapped positions.
pub fn fk_estimate_with(
    noise: &MollifiedNoise,
    z0: impl Fn(&[f64]) -> f64 + Sync,
    t: f64,
    x: &[f64],
    settings: &FkSettings,
) -> Result<FkEstimate> {
    let mut out = fk_estimate_batch(noise, z0, &[(t, x.to_vec())], &[settings.mode], settings.num_paths, settings.path_seed)?;
    Ok(out.remove(0))
}

/// Estimates at every `(t, x)` query under every mode, drawing each Brownian
/// path once. Path `p` is the same stream for every query, so each entry is
/// bit-identical to the matching single [`fk_estimate_with`] call. Output is
/// query-major: `out[q * modes.len() + m]`.
pub fn fk_estimate_batch(
    noise: &MollifiedNoise,
    z0: impl Fn(&[f64]) -> f64 + Sync,
    queries: &[(f64, Vec<f64>)],
    modes: &[CorrectionMode],
    num_paths: usize,
    path_seed: u64,
) -> Result<Vec<FkEstimate>> {
    let grid = *noise.grid();
    if num_paths < MIN_PATHS {
        return Err(Error::TooFewPaths(num_paths));
    }
    let mut starts = Vec::with_capacity(queries.len());
    for (t, x) in queries {
        starts.push((time_index(&grid, *t)?, node_position(&grid, x)?));
    }
    let k_max = starts.iter().map(|s| s.0).max().unwrap_or(0);
    let d = grid.dim();
    let sigma = (2.0 * grid.dt()).sqrt();
    let side = grid.side();
    let (dx, n) = (grid.dx(), grid.nodes_per_axis());
    let drift = |mode: CorrectionMode, k_end: usize| match mode {
        CorrectionMode::ItoCompensated => 0.5 * noise.compensator_rate() * grid.time(k_end),
        CorrectionMode::Uncompensated => 0.0,
    };

    // Step-major over blocks of paths, so each noise slice is read once per
    // block instead of once per path. Per-path arithmetic order is unchanged.
    let width = starts.len() * modes.len();
    let blocks: Vec<Vec<f64>> = (0..num_paths.div_ceil(PATH_BLOCK))
        .into_par_iter()
        .map(|b| {
            let first = b * PATH_BLOCK;
            let count = PATH_BLOCK.min(num_paths - first);
            let mut rngs: Vec<_> = (first..first + count).map(|p| stream(path_seed, Domain::Brownian, p as u64)).collect();
            let mut pos: Vec<[f64; MAX_DIM]> = (0..count).flat_map(|_| starts.iter().map(|s| s.1)).collect();
            let mut exponent = vec![0.0; count * starts.len()];
            let mut step = [0.0; MAX_DIM];
            for j in 0..k_max {
                for (p, rng) in rngs.iter_mut().enumerate() {
                    for sa in &mut step[..d] {
                        *sa = sigma * Distribution::<f64>::sample(&StandardNormal, rng);
                    }
                    for (q, &(k_end, _)) in starts.iter().enumerate() {
                        if j >= k_end {
                            continue;
                        }
                        let at = &mut pos[p * starts.len() + q];
                        exponent[p * starts.len() + q] += noise.slice(k_end - 1 - j)[wrapped_node(&at[..d], dx, n)];
                        for (pa, sa) in at[..d].iter_mut().zip(&step[..d]) {
                            *pa = wrap(*pa + sa, side);
                        }
                    }
                }
            }
            let mut vals = Vec::with_capacity(count * width);
            for p in 0..count {
                for (q, &(k_end, _)) in starts.iter().enumerate() {
                    let v0 = z0(&pos[p * starts.len() + q][..d]);
                    let e = exponent[p * starts.len() + q];
                    vals.extend(modes.iter().map(|&m| v0 * (e - drift(m, k_end)).exp()));
                }
            }
            vals
        })
        .collect();
    let per_path: Vec<&[f64]> = blocks.iter().flat_map(|v| v.chunks(width)).collect();

    let n = num_paths as f64;
    let mut out = Vec::with_capacity(starts.len() * modes.len());
    for (q, &(k_end, start)) in starts.iter().enumerate() {
        for (m, &mode) in modes.iter().enumerate() {
            let col = q * modes.len() + m;
            let values: Vec<f64> = per_path.iter().map(|r| r[col]).collect();
            let mean = pairwise_sum(&values) / n;
            let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
            let var = pairwise_sum(&dev) / (n - 1.0);
            if !mean.is_finite() {
                return Err(Error::NonFinite { what: "Feynman-Kac mean", index: col });
            }
            out.push(FkEstimate {
                t: grid.time(k_end),
                x: start[..d].to_vec(),
                num_paths,
                mean,
                stderr: (var / n).sqrt(),
                correction_mode: mode,
            });
        }
    }
    Ok(out)
}

/// Estimate set beside the solver value at the same point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FkComparison {
    pub estimate: FkEstimate,
    pub solver_value: f64,
    /// `(mean - solver) / stderr`; 0 when both the gap and the stderr vanish.
    pub z_score: f64,
}

impl FkComparison {
    pub fn new(estimate: FkEstimate, solver_value: f64) -> Self {
        let gap = estimate.mean - solver_value;
        let z_score = if gap == 0.0 { 0.0 } else { gap / estimate.stderr };
        Self { estimate, solver_value, z_score }
    }

    pub fn csv_header(d: usize) -> String {
        let xs: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
        format!("t,{},num_paths,mode,mean,stderr,solver_value,z_score", xs.join(","))
    }

    pub fn csv_row(&self) -> String {
        let e = &self.estimate;
        let xs: Vec<String> = e.x.iter().map(|v| fmt_num(*v)).collect();
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt_num(e.t),
            xs.join(","),
            e.num_paths,
            e.correction_mode,
            fmt_num(e.mean),
            fmt_num(e.stderr),
            fmt_num(self.solver_value),
            fmt_num(self.z_score)
        )
    }
}

/// Outcome of comparing both correction modes against the solver.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    /// Mode whose largest `|z|` over the probes is smaller.
    pub selected: CorrectionMode,
    pub rows: Vec<FkComparison>,
}

impl Calibration {
    pub fn max_abs_z(&self, mode: CorrectionMode) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.estimate.correction_mode == mode)
            .fold(0.0, |m, r| m.max(r.z_score.abs()))
    }
}

/// Runs both modes at each probe `(k, node)` against `solver(k, node)`.
pub fn calibrate(
    noise: &MollifiedNoise,
    f: &InitialData,
    probes: &[(usize, usize)],
    num_paths: usize,
    path_seed: u64,
    solver: impl Fn(usize, usize) -> f64,
) -> Result<Calibration> {
    let grid = *noise.grid();
    let kind = f.kind().clone();
    let queries: Vec<(f64, Vec<f64>)> = probes.iter().map(|&(k, node)| (grid.time(k), grid.coords(node)[..grid.dim()].to_vec())).collect();
    let est = fk_estimate_batch(noise, |y: &[f64]| kind.eval(&grid, y).exp(), &queries, &CorrectionMode::ALL, num_paths, path_seed)?;
    // mode-major rows, probes in order within each mode
    let mut rows = Vec::with_capacity(est.len());
    for m in 0..CorrectionMode::ALL.len() {
        for (q, &(k, node)) in probes.iter().enumerate() {
            rows.push(FkComparison::new(est[q * CorrectionMode::ALL.len() + m].clone(), solver(k, node)));
        }
    }
    let mut cal = Calibration { selected: CorrectionMode::ItoCompensated, rows };
    if cal.max_abs_z(CorrectionMode::Uncompensated) < cal.max_abs_z(CorrectionMode::ItoCompensated) {
        cal.selected = CorrectionMode::Uncompensated;
    }
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{solve_heat, InitialKind};
    use crate::noise::{mollify, sample_noise_with_amplitude, Mollifier};

    fn quiet(g: TorusGrid) -> MollifiedNoise {
        mollify(&sample_noise_with_amplitude(g, 0, 0.0), &Mollifier::new(8, g).unwrap()).unwrap()
    }

    fn settings(num_paths: usize, mode: CorrectionMode) -> FkSettings {
        FkSettings { num_paths, mode, path_seed: 17 }
    }

    #[test]
    fn path_starts_at_origin_and_is_reproducible() {
        let g = TorusGrid::unit(2, 16, 0.1, 50).unwrap();
        let p = brownian_path(&g, 3, 0);
        assert_eq!(p.len(), 51);
        assert_eq!(p.displacement(0), &[0.0, 0.0]);
        assert_eq!(p.displacement(50), brownian_path(&g, 3, 0).displacement(50));
        assert_ne!(p.displacement(50), brownian_path(&g, 3, 1).displacement(50));
        for k in 0..=50 {
            assert!(p.position(k).iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn zero_data_without_noise_is_exactly_one() {
        let g = TorusGrid::unit(1, 32, 0.01, 200).unwrap();
        let mn = quiet(g);
        let est = fk_estimate(&mn, &InitialData::zero(g), 0.01, &[0.25], &settings(500, CorrectionMode::ItoCompensated)).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
    }

    #[test]
    fn modes_coincide_without_noise() {
        let g = TorusGrid::unit(1, 32, 0.01, 200).unwrap();
        let mn = quiet(g);
        let f = InitialData::new(InitialKind::Cosine { amplitude: 0.5, wavenumber: 1 }, g).unwrap();
        let a = fk_estimate(&mn, &f, 0.005, &[0.5], &settings(300, CorrectionMode::ItoCompensated)).unwrap();
        let b = fk_estimate(&mn, &f, 0.005, &[0.5], &settings(300, CorrectionMode::Uncompensated)).unwrap();
        assert_eq!((a.mean, a.stderr), (b.mean, b.stderr));
    }

    #[test]
    fn rejects_bad_requests() {
        let g = TorusGrid::unit(1, 32, 0.01, 200).unwrap();
        let mn = quiet(g);
        let f = InitialData::zero(g);
        let s = settings(100, CorrectionMode::ItoCompensated);
        assert!(matches!(fk_estimate(&mn, &f, 0.00001, &[0.0], &s), Err(Error::OffGrid(_))));
        assert!(matches!(fk_estimate(&mn, &f, 0.02, &[0.0], &s), Err(Error::OffGrid(_))));
        assert!(matches!(fk_estimate(&mn, &f, 0.01, &[0.01], &s), Err(Error::OffGrid(_))));
        assert!(matches!(fk_estimate(&mn, &f, 0.01, &[0.0, 0.0], &s), Err(Error::OffGrid(_))));
        let few = settings(99, CorrectionMode::ItoCompensated);
        assert!(matches!(fk_estimate(&mn, &f, 0.01, &[0.0], &few), Err(Error::TooFewPaths(99))));
    }

    #[test]
    fn time_zero_returns_initial_value() {
        let g = TorusGrid::unit(1, 32, 0.01, 200).unwrap();
        let mn = mollify(&sample_noise_with_amplitude(g, 1, 1.0), &Mollifier::new(8, g).unwrap()).unwrap();
        let f = InitialData::new(InitialKind::Cosine { amplitude: 0.5, wavenumber: 1 }, g).unwrap();
        let est = fk_estimate(&mn, &f, 0.0, &[0.25], &settings(100, CorrectionMode::ItoCompensated)).unwrap();
        assert!((est.mean - (0.5 * (std::f64::consts::FRAC_PI_2).cos()).exp()).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_solver_on_small_case() {
        let g = TorusGrid::unit(1, 32, 0.05, 1000).unwrap();
        let mn = mollify(&sample_noise_with_amplitude(g, 2, 1.0), &Mollifier::new(4, g).unwrap()).unwrap();
        let f = InitialData::new(InitialKind::Cosine { amplitude: 0.3, wavenumber: 1 }, g).unwrap();
        let sol = solve_heat(&g, &mn, &f).unwrap();
        let est = fk_estimate(&mn, &f, 0.05, &[0.5], &settings(4000, CorrectionMode::ItoCompensated)).unwrap();
        let z = sol.terminal().values()[16];
        assert!((est.mean - z).abs() < 4.0 * est.stderr, "{} vs {z} ± {}", est.mean, est.stderr);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn csv_row_has_header_arity() {
        let est = FkEstimate { t: 0.1, x: vec![0.5, 0.25], num_paths: 100, mean: 1.0, stderr: 0.1, correction_mode: CorrectionMode::Uncompensated };
        let row = FkComparison::new(est, 1.2);
        assert_eq!(FkComparison::csv_header(2).split(',').count(), row.csv_row().split(',').count());
        assert!((row.z_score + 2.0).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single_queries_bit_for_bit() {
        let g = TorusGrid::unit(2, 16, 0.02, 100).unwrap();
        let mn = mollify(&sample_noise_with_amplitude(g, 5, 1.0), &Mollifier::new(4, g).unwrap()).unwrap();
        let f = InitialData::new(InitialKind::Cosine { amplitude: 0.4, wavenumber: 1 }, g).unwrap();
        let kind = f.kind().clone();
        // 130 paths: two full blocks and a ragged one
        let queries = vec![(0.02, vec![0.25, 0.5]), (0.01, vec![0.0, 0.9375]), (0.0, vec![0.5, 0.5])];
        let batch = fk_estimate_batch(&mn, |y: &[f64]| kind.eval(&g, y).exp(), &queries, &CorrectionMode::ALL, 130, 9).unwrap();
        for (q, (t, x)) in queries.iter().enumerate() {
            for (m, mode) in CorrectionMode::ALL.into_iter().enumerate() {
                let single = fk_estimate(&mn, &f, *t, x, &FkSettings { num_paths: 130, mode, path_seed: 9 }).unwrap();
                assert_eq!(batch[q * 2 + m], single);
            }
        }
    }
}
