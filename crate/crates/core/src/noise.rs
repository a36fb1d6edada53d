//! Counter-addressed Gaussian increments.
//!
//! Every increment is addressed by `(lane key, particle, step)`. The lane key
//! is derived from the master seed and a chain of lane tags by SplitMix64;
//! the particle index selects the ChaCha8 stream and the step index fixes the
//! word position inside the stream. One step always consumes
//! `4 * ceil(m / 2)` 32-bit words (two `u64` per Box-Muller pair), so
//! sequential cursors and random access see the same numbers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Lane tags used by the experiment modules.
pub mod lanes {
    pub const ENSEMBLE: u64 = 0x454e_5345;
    pub const BACKGROUND: u64 = 0x4247_524e;
    pub const TAGGED: u64 = 0x5441_4744;
    pub const REPLICA: u64 = 0x5245_504c;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const INIT: u64 = 0x494e_4954;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
    key: [u8; 32],
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        let mut s = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        Self { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent sub-stream for `tag`. Lanes compose: `s.lane(a).lane(b)`.
    pub fn lane(&self, tag: u64) -> Self {
        let mut s = tag ^ 0x6a09_e667_f3bc_c909;
        for chunk in self.key.chunks_exact(8) {
            let w = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            s ^= w;
            splitmix64(&mut s);
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        Self { seed: self.seed, key }
    }

    /// Standard normals addressed by `(particle, step)`, written into `out`.
    pub fn fill(&self, particle: u64, step: u64, out: &mut [f64]) {
        self.cursor(particle, step, out.len()).next_into(out);
    }

    /// Sequential reader positioned at `(particle, start_step)` for draws of
    /// width `m`.
    pub fn cursor(&self, particle: u64, start_step: u64, m: usize) -> NoiseCursor {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(particle);
        let words = words_per_step(m);
        rng.set_word_pos(u128::from(start_step) * words);
        NoiseCursor { rng, m }
    }

    /// Uniform `u64` addressed by `(index, counter)`; used for resampling.
    pub fn uniform_u64(&self, index: u64, counter: u64) -> u64 {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng.set_word_pos(u128::from(counter) * 2);
        rng.next_u64()
    }
}

fn words_per_step(m: usize) -> u128 {
    4 * m.div_ceil(2) as u128
}

/// Sequential Gaussian reader for one particle.
#[derive(Clone, Debug)]
pub struct NoiseCursor {
    rng: ChaCha8Rng,
    m: usize,
}

impl NoiseCursor {
    pub fn width(&self) -> usize {
        self.m
    }

    /// Draws the next step's `m` standard normals.
    pub fn next_into(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        let mut i = 0;
        while i < self.m {
            let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
            out[i] = z0;
            if i + 1 < self.m {
                out[i + 1] = z1;
            }
            i += 2;
        }
    }
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let u1 = 1.0 - unit(a);
    let u2 = unit(b);
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_cursor() {
        let ns = NoiseStream::new(7).lane(lanes::ENSEMBLE);
        for m in [1usize, 2, 3, 5] {
            let mut cur = ns.cursor(11, 0, m);
            let mut seq = vec![0.0; m];
            let mut ra = vec![0.0; m];
            for step in 0..50 {
                cur.next_into(&mut seq);
                ns.fill(11, step, &mut ra);
                assert_eq!(seq, ra, "m={m} step={step}");
            }
        }
    }

    #[test]
    fn lanes_and_particles_differ() {
        let ns = NoiseStream::new(1);
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        ns.fill(0, 0, &mut a);
        ns.fill(1, 0, &mut b);
        assert_ne!(a, b);
        ns.lane(3).fill(0, 0, &mut b);
        assert_ne!(a, b);
        ns.lane(3).lane(4).fill(0, 0, &mut a);
        ns.lane(4).lane(3).fill(0, 0, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn moments_are_standard_normal() {
        let ns = NoiseStream::new(99);
        let mut cur = ns.cursor(0, 0, 3);
        let mut z = [0.0; 3];
        let n = 200_000;
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            cur.next_into(&mut z);
            for &x in &z {
                s1 += x;
                s2 += x * x;
                s4 += x.powi(4);
            }
        }
        let cnt = (3 * n) as f64;
        assert!((s1 / cnt).abs() < 0.01);
        assert!((s2 / cnt - 1.0).abs() < 0.01);
        assert!((s4 / cnt - 3.0).abs() < 0.05);
    }
}
