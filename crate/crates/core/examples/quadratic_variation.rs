//! The mollified Wiener process at a node is a Brownian motion with
//! quadratic variation `c_n t`; its estimator converges like `√(2/M)`.
//!
//! cargo run --release --example quadratic_variation

use burgerslab::noise::{mollify, quadratic_variation, sample_noise, wiener_path, Mollifier};
use burgerslab::TorusGrid;

fn main() -> burgerslab::Result<()> {
    for m_steps in [1_000, 4_000, 16_000] {
        let g = TorusGrid::unit(1, 128, 0.1, m_steps)?;
        let mn = mollify(&sample_noise(g, 7), &Mollifier::new(8, g)?)?;
        let path = wiener_path(&mn, &[64])?;
        let qv = quadratic_variation(&path)? / g.horizon();
        println!(
            "M = {m_steps:>6}: QV/T = {qv:.4}, c_n = {:.4}, relative error {:+.3} (expected spread {:.3})",
            mn.c_n_discrete(),
            qv / mn.c_n_discrete() - 1.0,
            (2.0 / m_steps as f64).sqrt()
        );
    }
    Ok(())
}
