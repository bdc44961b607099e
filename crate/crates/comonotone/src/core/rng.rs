use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Auxiliary randomness (bootstrap resampling, factorization restarts,
/// pre-pass mean estimation) draws from streams at or above this offset so it
/// can never collide with per-path streams, which count up from 0.
pub const AUX_STREAM_BASE: u64 = 1 << 48;

/// A named substream of a counter-based generator.
///
/// `(seed, stream)` fully determines the random sequence: path `i` of an
/// experiment always uses stream `i` of the experiment's master seed, so
/// estimates are bit-identical however the paths are scheduled across worker
/// threads, and two estimators given the same seed consume the *same*
/// driving noise (common random numbers).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Instantiate the generator for this substream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
