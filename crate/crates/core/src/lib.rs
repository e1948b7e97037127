//! Cole-Hopf sequences for the conservative stochastic Burgers equation
//! `dU = (ΔU + ∇|U|²) dt + ∇dW` on a periodic lattice.
//!
//! The crate builds `U_n = ∇ log Z_n`, where `Z_n` solves the stochastic heat
//! equation driven by white noise mollified at scale `1/n`, and measures how
//! closely each realization satisfies the identities that make `(U_n)` a weak
//! generalized solution: the noise laws, the quadratic variation `C_n t`, the
//! KPZ form of `log Z_n`, the weak Burgers identity, and the limits `n → ∞`.
//!
//! Module map:
//! - [`lattice`]: torus grid, stencils, inner products
//! - [`noise`]: white noise, mollifiers, cylindrical Wiener paths
//! - [`heat`]: positivity-preserving Itô scheme for `Z_n`
//! - [`colehopf`]: `H_n`, `U_n`, KPZ and weak-form residuals, limits
//! - [`fk`]: Feynman-Kac Monte Carlo estimator of `Z_n`
//! - [`harness`]: test-function bank, studies, reports, CLI plumbing

pub mod binfmt;
pub mod colehopf;
pub mod error;
pub mod fk;
pub mod harness;
pub mod heat;
pub mod lattice;
pub mod noise;
pub mod quad;

pub use error::{Error, Result};
pub use lattice::{ScalarField, TorusGrid, VectorField};
