//! `⟨U_n, φ⟩` along n = 4, 8, 16, 32 for one realization in 1-D, beside the
//! grid-scale Cole-Hopf reference driven by the unmollified noise.
//!
//! cargo run --release --example distributional_limit

use burgerslab::colehopf::{cauchy_gaps, cole_hopf, distributional_limit_1d, pair_velocity};
use burgerslab::harness::default_bank;
use burgerslab::heat::{solve_heat, InitialData};
use burgerslab::noise::{mollify, sample_noise, MollifiedNoise, Mollifier};
use burgerslab::TorusGrid;

fn main() -> burgerslab::Result<()> {
    let g = TorusGrid::unit(1, 128, 0.1, 2 * 128 * 128)?;
    let w = sample_noise(g, 0);
    let f = InitialData::zero(g);
    let trajs = [4, 8, 16, 32]
        .into_iter()
        .map(|n| cole_hopf(&solve_heat(&g, &mollify(&w, &Mollifier::new(n, g)?)?, &f)?))
        .collect::<burgerslab::Result<Vec<_>>>()?;
    let grid_scale = cole_hopf(&solve_heat(&g, &MollifiedNoise::unmollified(&w), &f)?)?;
    for phi in default_bank(&g) {
        let values = distributional_limit_1d(&trajs, &phi)?;
        let gaps: Vec<String> = cauchy_gaps(&values).iter().map(|v| format!("{v:.2e}")).collect();
        println!(
            "{}: <U_32, phi> = {:+.6e}, grid scale = {:+.6e}, Cauchy gaps [{}]",
            phi.id,
            values[3],
            pair_velocity(&grid_scale, &phi)?,
            gaps.join(", ")
        );
    }
    Ok(())
}
