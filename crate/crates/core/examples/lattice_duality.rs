//! Discrete integration by parts on the torus: `⟨∇u, v⟩ = -⟨u, ∇·v⟩` holds
//! to round-off, and the compact Laplacian is self-adjoint.
//!
//! cargo run --example lattice_duality

use burgerslab::lattice::{divergence, gradient, inner_space, laplacian};
use burgerslab::{ScalarField, TorusGrid, VectorField};
use std::f64::consts::PI;

fn main() -> burgerslab::Result<()> {
    for d in [1, 2] {
        let g = TorusGrid::unit(d, 48, 1.0, 2)?;
        let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() + x.iter().map(|xi| (6.0 * PI * xi).cos()).sum::<f64>())?;
        let w = ScalarField::from_fn(g, |x| (-(x[0] - 0.3).powi(2) / 0.01).exp())?;
        let v = VectorField::from_fn(g, |x, out| {
            for (a, o) in out.iter_mut().enumerate() {
                *o = (2.0 * PI * (x[a] + 0.1 * a as f64)).cos().powi(3);
            }
        })?;
        let lhs = inner_space(&gradient(&u), &v)?;
        let rhs = -inner_space(&u, &divergence(&v))?;
        let sym = inner_space(&laplacian(&u), &w)? - inner_space(&u, &laplacian(&w))?;
        println!("d={d}: <grad u, v> = {lhs:+.15e}  -<u, div v> = {rhs:+.15e}  laplacian asymmetry = {sym:.1e}");
    }
    Ok(())
}
