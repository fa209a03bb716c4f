//! Seeded draws of rational model parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qarith::Rational;

/// Numerators and denominators are drawn from `1..=MAX_PART`.
pub const MAX_PART: i64 = 1000;

pub struct ParamSampler {
    rng: ChaCha8Rng,
}

impl ParamSampler {
    pub fn new(seed: u64) -> Self {
        ParamSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A positive rational `a/b` with `a, b` in `1..=MAX_PART`.
    pub fn rational(&mut self) -> Rational {
        let a = self.rng.gen_range(1..=MAX_PART);
        let b = self.rng.gen_range(1..=MAX_PART);
        Rational::new(a, b)
    }

    /// `q` with `q != 1`.
    pub fn q(&mut self) -> Rational {
        loop {
            let q = self.rational();
            if !q.is_one() {
                return q;
            }
        }
    }

    /// `z` avoiding the poles `q^(m+1) = z` for every capacity in `caps`, and `z != 1`.
    pub fn z_for(&mut self, q: &Rational, caps: &[u32]) -> Rational {
        loop {
            let z = self.rational();
            if !z.is_one() && caps.iter().all(|&m| q.pow(i64::from(m) + 1) != z) {
                return z;
            }
        }
    }

    /// `q` and one `z` per site.
    pub fn q_and_zvec(&mut self, caps: &[u32]) -> (Rational, Vec<Rational>) {
        let q = self.q();
        let zs = caps.iter().map(|&m| self.z_for(&q, &[m])).collect();
        (q, zs)
    }

    /// `q` and a single `z` shared by every site.
    pub fn q_and_z(&mut self, caps: &[u32]) -> (Rational, Rational) {
        let q = self.q();
        let z = self.z_for(&q, caps);
        (q, z)
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.gen_range(0..len)
    }
}
