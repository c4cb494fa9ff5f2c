//! The single seeded random stream shared by a run.
//!
//! Every consumer draws whole 64-bit words, so the stream position after a
//! tick depends only on how many draws were made, never on the values drawn.
//! That is what makes the position resumable from a snapshot.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Rebuilds a stream at a recorded position (see [`RandomStream::position`]).
    pub fn resume(seed: u64, position: u128) -> Self {
        let mut stream = Self::from_seed(seed);
        stream.rng.set_word_pos(position);
        stream
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Position in 32-bit words from the start of the stream.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// One raw draw.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform index in `0..n` from exactly one draw (multiply-shift, no rejection).
    ///
    /// The bias is at most `n / 2^64`, far below anything observable at desk scale.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Fair coin from exactly one draw (top bit).
    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}

impl PartialEq for RandomStream {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.position() == other.position()
    }
}

impl Eq for RandomStream {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resume_continues_the_same_sequence() {
        let mut a = RandomStream::from_seed(42);
        for _ in 0..17 {
            a.next_u64();
        }
        let mut b = RandomStream::resume(42, a.position());
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn each_helper_consumes_one_word_pair() {
        let mut s = RandomStream::from_seed(7);
        let p0 = s.position();
        s.below(13);
        s.coin();
        assert_eq!(s.position() - p0, 4);
    }

    #[test]
    fn below_stays_in_range() {
        let mut s = RandomStream::from_seed(1);
        for n in 1..50 {
            for _ in 0..200 {
                assert!(s.below(n) < n);
            }
        }
    }
}
