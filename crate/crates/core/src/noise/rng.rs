use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the key spaces of independent consumers of randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Noise,
    Brownian,
    /// Random fields used by property checks.
    Fixture,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Noise => 0x6e6f_6973_655f_7774,
            Domain::Brownian => 0x6272_6f77_6e5f_666b,
            Domain::Fixture => 0x6669_7874_7572_6573,
        }
    }
}

/// Counter-based stream: the ChaCha key is `(seed, domain)` and `index` picks
/// the stream, so draws depend only on these three numbers.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.tag().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
