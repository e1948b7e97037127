//! Discrete space-time white noise, its mollification, and the mollified
//! cylindrical Wiener process.

pub mod mollified;
pub mod mollifier;
pub mod rng;
pub mod white;

pub use mollified::{mollify, quadratic_variation, wiener_path, MollifiedNoise, Regularization};
pub use mollifier::{h_eval, BumpProfile, Mollifier};
pub use white::{
    coarse_grain, coarse_grain_by, pair, sample_noise, sample_noise_with_amplitude, SpaceTimeSamples,
    WhiteNoiseRealization,
};
