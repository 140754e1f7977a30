//! Counter-based Gaussian noise.
//!
//! Every normal variate is a pure function of `(seed, step, particle,
//! role, coordinate)`: the seed fixes a ChaCha8 key, the step selects the
//! stream and `(particle, role)` selects a disjoint word range inside it.
//! No generator state is shared between particles, so results do not depend
//! on how work is split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in run manifests.
pub const GENERATOR_ID: &str = "chacha8-counter-boxmuller/v1";

/// Words reserved for each `(particle, role)` slot in a stream.
const WORDS_PER_SLOT: u128 = 1 << 20;
const ROLES: u128 = 8;

/// Which noise source a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum NoiseRole {
    X = 0,
    Y = 1,
    XReflect = 2,
    XSync = 3,
    YReflect = 4,
    YSync = 5,
    Init = 6,
    Sampling = 7,
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    key: [u8; 32],
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        Self { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Positioned generator for one `(step, particle, role)` slot.
    pub fn slot(&self, step: u64, particle: u64, role: NoiseRole) -> SlotRng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(step);
        rng.set_word_pos((particle as u128 * ROLES + role as u128) * WORDS_PER_SLOT);
        SlotRng { rng, spare: None }
    }

    /// Fill `out` with standard normals for one slot; coordinate `k` is `out[k]`.
    pub fn normals(&self, step: u64, particle: u64, role: NoiseRole, out: &mut [f64]) {
        let mut slot = self.slot(step, particle, role);
        for v in out.iter_mut() {
            *v = slot.normal();
        }
    }
}

/// Sequential draws from one slot. Box-Muller consumes exactly two words
/// per pair of normals, so coordinate `k` always maps to the same words.
pub struct SlotRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SlotRng {
    /// Uniform on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}
