//! Counter-based Gaussian increments.
//!
//! Every standard normal is addressed by `(master_seed, replica, step, mode,
//! component)`. The replica selects a ChaCha8 stream, and the remaining
//! indices select a fixed 4-word block inside that stream, so any increment
//! can be regenerated in isolation and replicas never share state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Standard normals drawn per `(step, mode)`: one for the heat equation and
/// two more for the joint wave increment.
pub const NORMALS_PER_MODE: usize = 3;

const WORDS_PER_NORMAL: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisePlan {
    pub master_seed: u64,
    pub replica: u64,
}

impl NoisePlan {
    pub fn new(master_seed: u64, replica: u64) -> Self {
        Self {
            master_seed,
            replica,
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replica);
        rng
    }

    fn index(step: u64, mode: usize, modes: usize, component: usize) -> u128 {
        ((step as u128 * modes as u128 + mode as u128) * NORMALS_PER_MODE as u128)
            + component as u128
    }

    /// Random access to a single standard normal.
    pub fn normal(&self, step: u64, mode: usize, modes: usize, component: usize) -> f64 {
        let mut rng = self.rng();
        rng.set_word_pos(Self::index(step, mode, modes, component) * WORDS_PER_NORMAL);
        box_muller(&mut rng)
    }

    /// Sequential reader positioned at the first normal of `start_step`.
    pub fn cursor(&self, modes: usize, start_step: u64) -> NoiseCursor {
        let mut rng = self.rng();
        rng.set_word_pos(Self::index(start_step, 0, modes, 0) * WORDS_PER_NORMAL);
        NoiseCursor { rng, modes }
    }
}

/// Reads increments in `(step, mode, component)` order without seeking.
#[derive(Debug, Clone)]
pub struct NoiseCursor {
    rng: ChaCha8Rng,
    modes: usize,
}

impl NoiseCursor {
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// The three normals of the next `(step, mode)` slot.
    pub fn next_triple(&mut self) -> [f64; 3] {
        [
            box_muller(&mut self.rng),
            box_muller(&mut self.rng),
            box_muller(&mut self.rng),
        ]
    }

    /// Fills `out[k]` with the triples of one whole step.
    pub fn next_step(&mut self, out: &mut [[f64; 3]]) {
        debug_assert_eq!(out.len(), self.modes);
        for o in out.iter_mut() {
            *o = self.next_triple();
        }
    }
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let a = rng.next_u64();
    let b = rng.next_u64();
    // (0, 1] and [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moments_are_standard() {
        let mut c = NoisePlan::new(11, 0).cursor(1, 0);
        let n = 200_000;
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            for x in c.next_triple() {
                s1 += x;
                s2 += x * x;
                s4 += x * x * x * x;
            }
        }
        let m = 3.0 * n as f64;
        assert!((s1 / m).abs() < 0.01);
        assert!((s2 / m - 1.0).abs() < 0.01);
        assert!((s4 / m - 3.0).abs() < 0.05);
    }

    #[test]
    fn replicas_differ() {
        let a = NoisePlan::new(5, 0).normal(0, 0, 1, 0);
        let b = NoisePlan::new(5, 1).normal(0, 0, 1, 0);
        assert_ne!(a, b);
    }

    proptest! {
        #[test]
        fn random_access_matches_cursor(seed in any::<u64>(), replica in 0u64..1000,
                                        step in 0u64..50, mode in 0usize..4, comp in 0usize..3) {
            let plan = NoisePlan::new(seed, replica);
            let mut cursor = plan.cursor(4, 0);
            let mut last = [0.0; 3];
            for _ in 0..=(step as usize * 4 + mode) {
                last = cursor.next_triple();
            }
            prop_assert_eq!(last[comp].to_bits(), plan.normal(step, mode, 4, comp).to_bits());
            let mut mid = plan.cursor(4, step);
            for _ in 0..mode {
                mid.next_triple();
            }
            prop_assert_eq!(mid.next_triple()[comp].to_bits(), last[comp].to_bits());
        }
    }
}
