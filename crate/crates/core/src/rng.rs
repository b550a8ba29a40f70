//! Deterministic, splittable random streams.
//!
//! A run owns one master seed that expands into independent per-component
//! streams (network init, environment resets, action noise, minibatch
//! shuffling, pair sampling). Components never share a stream, so adding or
//! removing one consumer cannot shift the draws seen by any other — which is
//! what makes "same seed, same metrics" hold across algorithm variants.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed roles for derived streams, hashed into the stream seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamId {
    PolicyInit = 1,
    ValueInit = 2,
    IntrinsicInit = 3,
    EnvReset = 4,
    ActionNoise = 5,
    Shuffle = 6,
    PairSampling = 7,
    Eval = 8,
}

/// xoshiro256++ stream with a Box-Muller cache for normal draws.
#[derive(Clone, Debug)]
pub struct Rng {
    state: [u64; 4],
    spare_normal: Option<f64>,
}

impl Rng {
    /// Stream seeded directly from a 64-bit value.
    pub fn seeded(seed: u64) -> Self {
        let mut s = seed;
        let state = [
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
        ];
        Rng {
            state,
            spare_normal: None,
        }
    }

    /// Derive the component stream for `id` from a master seed.
    pub fn stream(master: u64, id: StreamId) -> Self {
        Rng::seeded(master ^ (id as u64).wrapping_mul(0xA076_1D64_78BD_642F))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[low, high)`.
    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `[0, bound)`; `bound` must be nonzero.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (((self.next_u64() as u128) * (bound as u128)) >> 64) as usize
    }

    /// Standard normal draw (Box-Muller; the second value of each pair is
    /// cached, so draws are consumed from the stream deterministically).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - uniform() lies in (0, 1], keeping the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// The per-run streams consumed during training.
#[derive(Clone, Debug)]
pub struct StreamSet {
    pub env: Rng,
    pub noise: Rng,
    pub shuffle: Rng,
    pub pairs: Rng,
}

impl StreamSet {
    pub fn new(master: u64) -> Self {
        StreamSet {
            env: Rng::stream(master, StreamId::EnvReset),
            noise: Rng::stream(master, StreamId::ActionNoise),
            shuffle: Rng::stream(master, StreamId::Shuffle),
            pairs: Rng::stream(master, StreamId::PairSampling),
        }
    }
}
