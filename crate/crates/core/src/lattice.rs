//! Periodic space-time lattice and discrete calculus.
//!
//! Space is the torus `[0, L)^d` sampled at `N` nodes per axis, time is
//! `[0, T]` split into `M` steps. All stencils wrap periodically, so the
//! centered gradient and divergence are exact negative adjoints of each
//! other under [`inner_space`] and the compact Laplacian is self-adjoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct TorusGrid {
    d: usize,
    n: usize,
    l: f64,
    t: f64,
    m: usize,
    dx: f64,
    dt: f64,
}

/// Serialized form of a [`TorusGrid`]; spacings are derived on load.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct GridSpec {
    d: usize,
    n: usize,
    l: f64,
    t: f64,
    m: usize,
}

impl TryFrom<GridSpec> for TorusGrid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        TorusGrid::new(s.d, s.n, s.l, s.t, s.m)
    }
}

impl From<TorusGrid> for GridSpec {
    fn from(g: TorusGrid) -> Self {
        GridSpec { d: g.d, n: g.n, l: g.l, t: g.t, m: g.m }
    }
}

impl TorusGrid {
    pub fn new(d: usize, n: usize, l: f64, t: f64, m: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("N = {n} < 8")));
        }
        if m < 2 {
            return Err(Error::InvalidGrid(format!("M = {m} < 2")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {l} must be positive")));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon {t} must be positive")));
        }
        Ok(Self { d, n, l, t, m, dx: l / n as f64, dt: t / m as f64 })
    }

    /// Unit torus (`L = 1`).
    pub fn unit(d: usize, n: usize, t: f64, m: usize) -> Result<Self> {
        Self::new(d, n, 1.0, t, m)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.l
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// `dx^d`, the volume attached to one node.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.d as i32)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// `1 - 2d dt / dx^2`; the explicit heat step is a convex combination iff this is `>= 0`.
    pub fn stability_margin(&self) -> f64 {
        1.0 - 2.0 * self.d as f64 * self.dt / (self.dx * self.dx)
    }

    /// Flat-index stride of `axis`; axis 0 varies slowest.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.d].iter().fold(0, |acc, &c| acc * self.n + c % self.n)
    }

    pub fn coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.d {
            x[a] = mi[a] as f64 * self.dx;
        }
        x
    }

    /// Index of the periodic neighbor of `idx` one step along `axis`.
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let c = (idx / s) % self.n;
        match (forward, c) {
            (true, c) if c + 1 == self.n => idx + s - self.n * s,
            (true, _) => idx + s,
            (false, 0) => idx + (self.n - 1) * s,
            (false, _) => idx - s,
        }
    }

    /// Minimum-image representative of a displacement, in `[-L/2, L/2)`.
    pub fn wrap_displacement(&self, delta: f64) -> f64 {
        delta - self.l * (delta / self.l + 0.5).floor()
    }

    /// Nearest node to an arbitrary point, with periodic wrap.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for &xa in &x[..self.d] {
            let c = (xa / self.dx).round().rem_euclid(self.n as f64) as usize % self.n;
            idx = idx * self.n + c;
        }
        idx
    }

    /// Grid with `N / space_factor` nodes per axis and `M / time_factor` steps.
    pub fn coarsen(&self, space_factor: usize, time_factor: usize) -> Result<Self> {
        if space_factor == 0 || !self.n.is_multiple_of(space_factor) {
            return Err(Error::NonDivisible { factor: space_factor, what: "N", value: self.n });
        }
        if time_factor == 0 || !self.m.is_multiple_of(time_factor) {
            return Err(Error::NonDivisible { factor: time_factor, what: "M", value: self.m });
        }
        Self::new(self.d, self.n / space_factor, self.l, self.t, self.m / time_factor)
    }

    /// Calls `f(start, stride)` once per grid line running along `axis`.
    fn for_each_line(&self, axis: usize, mut f: impl FnMut(usize, usize)) {
        let s = self.stride(axis);
        let block = s * self.n;
        for outer in (0..self.num_nodes()).step_by(block) {
            for inner in 0..s {
                f(outer + inner, s);
            }
        }
    }
}

/// Common view of lattice fields used by the inner products.
pub trait LatticeField {
    fn grid(&self) -> &TorusGrid;
    fn data(&self) -> &[f64];
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::LengthMismatch { expected: grid.num_nodes(), found: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "scalar field", index });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_nodes());
        Self { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![0.0; grid.num_nodes()] }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.num_nodes()] }
    }

    /// Samples `f` at every node; `f` receives the node coordinates (length `d`).
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.num_nodes())
            .map(|i| f(&grid.coords(i)[..grid.dim()]))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm of `self - other`.
    pub fn max_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl LatticeField for ScalarField {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn data(&self) -> &[f64] {
        &self.values
    }
}

/// `d` scalar components stored one after another.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.dim() * grid.num_nodes();
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, found: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "vector field", index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![0.0; grid.dim() * grid.num_nodes()] }
    }

    /// Samples a vector-valued `f`, which writes `d` components into its output slice.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let (d, len) = (grid.dim(), grid.num_nodes());
        let mut values = vec![0.0; d * len];
        let mut buf = [0.0; MAX_DIM];
        for i in 0..len {
            f(&grid.coords(i)[..d], &mut buf[..d]);
            for a in 0..d {
                values[a * len + i] = buf[a];
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        let len = self.grid.num_nodes();
        &self.values[axis * len..(axis + 1) * len]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise squared Euclidean norm.
    pub fn norm_sq(&self) -> ScalarField {
        let len = self.grid.num_nodes();
        let mut out = vec![0.0; len];
        for a in 0..self.grid.dim() {
            for (o, v) in out.iter_mut().zip(self.component(a)) {
                *o += v * v;
            }
        }
        ScalarField::from_vec_unchecked(self.grid, out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &VectorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl LatticeField for VectorField {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn data(&self) -> &[f64] {
        &self.values
    }
}

/// Compact second-difference Laplacian written into `out`.
pub(crate) fn laplacian_raw(grid: &TorusGrid, u: &[f64], out: &mut [f64]) {
    let n = grid.nodes_per_axis();
    let inv_h2 = 1.0 / (grid.dx() * grid.dx());
    out.fill(0.0);
    for axis in 0..grid.dim() {
        grid.for_each_line(axis, |start, s| {
            for c in 0..n {
                let prev = if c == 0 { n - 1 } else { c - 1 };
                let next = if c + 1 == n { 0 } else { c + 1 };
                let i = start + c * s;
                out[i] += (u[start + next * s] - 2.0 * u[i] + u[start + prev * s]) * inv_h2;
            }
        });
    }
}

/// Centered difference along `axis`, written into `out`.
pub(crate) fn centered_diff_raw(grid: &TorusGrid, axis: usize, u: &[f64], out: &mut [f64]) {
    let n = grid.nodes_per_axis();
    let inv_2h = 0.5 / grid.dx();
    grid.for_each_line(axis, |start, s| {
        for c in 0..n {
            let prev = if c == 0 { n - 1 } else { c - 1 };
            let next = if c + 1 == n { 0 } else { c + 1 };
            out[start + c * s] = (u[start + next * s] - u[start + prev * s]) * inv_2h;
        }
    });
}

pub fn laplacian(u: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; u.values.len()];
    laplacian_raw(&u.grid, &u.values, &mut out);
    ScalarField::from_vec_unchecked(u.grid, out)
}

pub fn gradient(u: &ScalarField) -> VectorField {
    let (d, len) = (u.grid.dim(), u.grid.num_nodes());
    let mut values = vec![0.0; d * len];
    for (axis, chunk) in values.chunks_mut(len).enumerate() {
        centered_diff_raw(&u.grid, axis, &u.values, chunk);
    }
    VectorField { grid: u.grid, values }
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let len = v.grid.num_nodes();
    let mut out = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    for axis in 0..v.grid.dim() {
        centered_diff_raw(&v.grid, axis, v.component(axis), &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }
    ScalarField::from_vec_unchecked(v.grid, out)
}

fn check_same_grid(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("grids differ: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// `dx^d`-weighted sum of pointwise products.
pub fn inner_space<F: LatticeField>(u: &F, v: &F) -> Result<f64> {
    check_same_grid(u.grid(), v.grid())?;
    let (a, b) = (u.data(), v.data());
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    Ok(u.grid().cell_volume() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
}

/// `dt dx^d`-weighted double sum over matching time slices.
pub fn inner_spacetime<F: LatticeField>(us: &[F], vs: &[F]) -> Result<f64> {
    if us.len() != vs.len() {
        return Err(Error::LengthMismatch { expected: us.len(), found: vs.len() });
    }
    let Some(first) = us.first() else {
        return Ok(0.0);
    };
    let dt = first.grid().dt();
    let mut total = 0.0;
    for (u, v) in us.iter().zip(vs) {
        total += inner_space(u, v)?;
    }
    Ok(dt * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::unit(1, n, 0.1, 10).unwrap()
    }

    fn sin1(g: TorusGrid) -> ScalarField {
        ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::unit(0, 16, 1.0, 4).is_err());
        assert!(TorusGrid::unit(4, 16, 1.0, 4).is_err());
        assert!(TorusGrid::unit(1, 7, 1.0, 4).is_err());
        assert!(TorusGrid::unit(1, 8, 1.0, 1).is_err());
        assert!(TorusGrid::new(1, 8, -1.0, 1.0, 4).is_err());
        let g = TorusGrid::new(2, 10, 2.0, 0.5, 5).unwrap();
        assert_eq!(g.dx(), 0.2);
        assert_eq!(g.dt(), 0.1);
        assert_eq!(g.num_nodes(), 100);
    }

    #[test]
    fn grid_serde_rederives_spacing() {
        let g = TorusGrid::unit(2, 32, 0.1, 100).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: TorusGrid = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        assert!(serde_json::from_str::<TorusGrid>(r#"{"d":1,"n":4,"l":1.0,"t":1.0,"m":4}"#).is_err());
    }

    #[test]
    fn index_roundtrip_and_neighbors() {
        let g = TorusGrid::unit(3, 8, 1.0, 4).unwrap();
        for idx in [0, 7, 8, 63, 64, 511, 300] {
            assert_eq!(g.flat_index(&g.multi_index(idx)), idx);
            for axis in 0..3 {
                let f = g.neighbor(idx, axis, true);
                assert_eq!(g.neighbor(f, axis, false), idx);
                let mut mi = g.multi_index(idx);
                mi[axis] = (mi[axis] + 1) % 8;
                assert_eq!(g.flat_index(&mi), f);
            }
        }
    }

    #[test]
    fn nearest_node_wraps() {
        let g = TorusGrid::unit(2, 8, 1.0, 4).unwrap();
        assert_eq!(g.nearest_node(&[0.0, 0.0]), 0);
        assert_eq!(g.nearest_node(&[-0.01, 0.99]), 0);
        assert_eq!(g.nearest_node(&[0.126, -0.124]), g.flat_index(&[1, 7]));
        assert!((g.wrap_displacement(0.9) + 0.1).abs() < 1e-15);
        assert!((g.wrap_displacement(-0.7) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn stencils_annihilate_constants() {
        for d in 1..=3 {
            let g = TorusGrid::unit(d, 8, 1.0, 4).unwrap();
            let c = ScalarField::constant(g, 3.7);
            assert_eq!(laplacian(&c).max_abs(), 0.0);
            assert_eq!(gradient(&c).max_abs(), 0.0);
            let v = VectorField::from_fn(g, |_, out| out.iter_mut().for_each(|o| *o = -1.25)).unwrap();
            assert_eq!(divergence(&v).max_abs(), 0.0);
        }
    }

    #[test]
    fn laplacian_of_sine_within_taylor_bound() {
        let g = grid1(64);
        let lap = laplacian(&sin1(g));
        let exact = ScalarField::from_fn(g, |x| -(2.0 * PI).powi(2) * (2.0 * PI * x[0]).sin()).unwrap();
        let bound = (2.0 * PI).powi(4) * g.dx().powi(2) / 12.0 * 1.1;
        assert!(lap.max_diff(&exact) <= bound, "{} > {bound}", lap.max_diff(&exact));
    }

    #[test]
    fn laplacian_is_axis_separable() {
        let g2 = TorusGrid::unit(2, 32, 1.0, 4).unwrap();
        let u = ScalarField::from_fn(g2, |x| (2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).sin()).unwrap();
        let one = laplacian(&sin1(grid1(32)));
        let lap = laplacian(&u);
        for idx in 0..g2.num_nodes() {
            let mi = g2.multi_index(idx);
            let expect = one.values()[mi[0]] + one.values()[mi[1]];
            assert!((lap.values()[idx] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_of_sine_second_order() {
        let err = |n: usize| {
            let g = grid1(n);
            let grad = gradient(&sin1(g));
            let exact = VectorField::from_fn(g, |x, o| o[0] = 2.0 * PI * (2.0 * PI * x[0]).cos()).unwrap();
            grad.max_diff(&exact)
        };
        let (e1, e2) = (err(32), err(64));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
        // Taylor remainder: (2 pi)^3 dx^2 / 6
        assert!(e2 <= (2.0 * PI).powi(3) / 6.0 / 64.0f64.powi(2) * 1.01);
    }

    #[test]
    fn gradient_has_no_component_without_variation() {
        let g = TorusGrid::unit(2, 16, 1.0, 4).unwrap();
        let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos() + x[0] * 0.0).unwrap();
        let grad = gradient(&u);
        assert!(grad.component(1).iter().all(|&v| v == 0.0));
        assert!(grad.component(0).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn divergence_in_1d_is_gradient() {
        let g = grid1(32);
        let u = sin1(g);
        let v = VectorField::new(g, u.values().to_vec()).unwrap();
        assert_eq!(divergence(&v).values(), gradient(&u).component(0));
    }

    #[test]
    fn wide_and_compact_laplacians_differ_at_second_order() {
        // Fourier oracle: compact symbol -4 sin^2(k h/2)/h^2, wide symbol -sin^2(k h)/h^2.
        let k = 2.0 * PI;
        let gap = |n: usize| {
            let g = grid1(n);
            let u = sin1(g);
            let wide = divergence(&gradient(&u));
            let compact = laplacian(&u);
            let h = g.dx();
            let predicted = ((k * h).sin().powi(2) - 4.0 * (k * h / 2.0).sin().powi(2)).abs() / (h * h);
            let measured = wide.max_diff(&compact);
            assert!((measured - predicted).abs() <= 1e-9 * predicted.max(1.0));
            // leading term k^4 h^2 / 4
            assert!(measured <= k.powi(4) * h * h / 4.0);
            measured
        };
        let order = (gap(32) / gap(64)).log2();
        assert!((order - 2.0).abs() < 0.1);
    }

    #[test]
    fn inner_products_on_trig_data() {
        let g = grid1(64);
        let s = sin1(g);
        let c = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!((inner_space(&s, &s).unwrap() - 0.5).abs() < 1e-14);
        assert!(inner_space(&s, &c).unwrap().abs() < 1e-15);
        assert_eq!(inner_space(&ScalarField::zeros(g), &ScalarField::zeros(g)).unwrap(), 0.0);
        let other = grid1(32);
        assert!(matches!(inner_space(&s, &sin1(other)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn spacetime_inner_product_factorizes() {
        let g = TorusGrid::unit(1, 16, 1.0, 8).unwrap();
        let base = sin1(g);
        let psi: Vec<f64> = (0..8).map(|k| (k as f64 * 0.3).exp()).collect();
        let us: Vec<ScalarField> = psi.iter().map(|p| base.map(|v| p * v).unwrap()).collect();
        let vs: Vec<ScalarField> = vec![base.clone(); 8];
        let lhs = inner_spacetime(&us, &vs).unwrap();
        let rhs = psi.iter().sum::<f64>() * g.dt() * inner_space(&base, &base).unwrap();
        assert!((lhs - rhs).abs() < 1e-14 * rhs.abs());

        let consts = inner_spacetime(&vs, &vs).unwrap();
        assert!((consts - g.horizon() * inner_space(&base, &base).unwrap()).abs() < 1e-14);

        let zeros = vec![ScalarField::zeros(g); 8];
        assert_eq!(inner_spacetime(&zeros, &zeros).unwrap(), 0.0);
        assert!(inner_spacetime(&zeros, &zeros[..3]).is_err());
    }

    #[test]
    fn field_constructors_reject_bad_input() {
        let g = grid1(8);
        assert!(matches!(ScalarField::new(g, vec![0.0; 7]), Err(Error::LengthMismatch { .. })));
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite { index: 3, .. })));
        assert!(VectorField::new(g, vec![1.0; 8]).is_ok());
    }
}
