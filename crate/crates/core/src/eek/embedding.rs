use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::EekError;
use crate::bits::{iota, BitString};
use crate::modmath::GroupDescription;

/// Number of `(n+1)`-bit chunks so that the identity fallback has probability
/// at most `1 / (n ln n)`.
///
/// A chunk is rejected with probability `1 - (q-1)/2^(n+1) <= 3/4`, so
/// `ceil(log_{4/3}(n ln n))` chunks suffice. Never less than one chunk.
pub fn chunk_count_for(n: u32) -> usize {
    let n = n as f64;
    let target = n * n.ln();
    if target <= 1.0 {
        return 1;
    }
    ((target.ln() / (4.0f64 / 3.0).ln()).ceil() as usize).max(1)
}

/// Concept-friendly embedding of `{0,1}^((n+1)ν)` into the subgroup.
///
/// The input is read as `ν` chunks of `n + 1` bits. The first chunk whose
/// value lies in the subgroup and differs from 1 is the output; if every
/// chunk is rejected the result is the identity.
#[derive(Debug, Clone)]
pub struct Embedding {
    group: GroupDescription,
    chunks: usize,
}

impl Embedding {
    pub fn new(group: GroupDescription) -> Self {
        let chunks = chunk_count_for(group.n);
        Embedding { group, chunks }
    }

    pub fn with_chunks(group: GroupDescription, chunks: usize) -> Result<Self, EekError> {
        if chunks == 0 {
            return Err(EekError::InvalidArgument("embedding needs at least one chunk".into()));
        }
        Ok(Embedding { group, chunks })
    }

    pub fn group(&self) -> &GroupDescription {
        &self.group
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    pub fn chunk_bits(&self) -> usize {
        self.group.n as usize + 1
    }

    /// `n' = (n + 1) * ν`.
    pub fn input_bits(&self) -> usize {
        self.chunk_bits() * self.chunks
    }

    fn accepts(&self, value: &BigUint) -> bool {
        !value.is_one() && self.group.contains(value)
    }

    pub fn embed(&self, v: &BitString) -> Result<BigUint, EekError> {
        if v.len() != self.input_bits() {
            return Err(EekError::InvalidArgument(format!(
                "embedding input has {} bits, expected {}",
                v.len(),
                self.input_bits()
            )));
        }
        let width = self.chunk_bits();
        for chunk in v.bits().chunks(width) {
            let value = iota(chunk);
            if self.accepts(&value) {
                return Ok(value);
            }
        }
        Ok(BigUint::one())
    }

    /// Count of rejected values for a single chunk, `2^(n+1) - (q - 1)`.
    fn rejected_per_chunk(&self) -> BigUint {
        (BigUint::one() << self.chunk_bits()) - (&self.group.q - 1u32)
    }

    /// Exact probability that a uniform input embeds to the identity.
    pub fn identity_probability(&self) -> f64 {
        self.rejection_ratio().powi(self.chunks as i32)
    }

    fn rejection_ratio(&self) -> f64 {
        let rejected = self.rejected_per_chunk().to_f64().unwrap_or(f64::INFINITY);
        rejected / 2f64.powi(self.chunk_bits() as i32)
    }

    /// Uniform sample from the preimage of `target`.
    ///
    /// The preimage splits by the index `k` of the first accepted chunk: the
    /// `k` leading chunks are rejected values, chunk `k` encodes the target and
    /// the rest is free. Pattern `k` holds `R^k * 2^((n+1)(ν-1-k))` strings, so
    /// `k` is drawn with weight `(R / 2^(n+1))^k` and each part filled uniformly.
    pub fn sample_preimage<R: Rng + ?Sized>(&self, target: &BigUint, rng: &mut R) -> Result<BitString, EekError> {
        if target.is_one() {
            return Err(EekError::InvalidArgument("the identity has no sampled preimage".into()));
        }
        self.group.ensure_member(target)?;
        let width = self.chunk_bits();
        let ratio = self.rejection_ratio();
        let weights: Vec<f64> = (0..self.chunks).map(|k| ratio.powi(k as i32)).collect();
        let first = WeightedIndex::new(&weights).expect("weights are positive").sample(rng);

        let mut parts = Vec::with_capacity(self.chunks);
        for _ in 0..first {
            parts.push(self.rejected_chunk(rng));
        }
        parts.push(BitString::from_value(target, width));
        for _ in first + 1..self.chunks {
            parts.push(BitString::random(width, rng));
        }
        Ok(BitString::concat(&parts))
    }

    /// Uniform string whose every chunk is rejected, i.e. the fallback preimage of 1.
    pub fn sample_identity_preimage<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let parts: Vec<BitString> = (0..self.chunks).map(|_| self.rejected_chunk(rng)).collect();
        BitString::concat(&parts)
    }

    fn rejected_chunk<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        loop {
            let candidate = BitString::random(self.chunk_bits(), rng);
            if !self.accepts(&candidate.iota()) {
                return candidate;
            }
        }
    }

    /// Enumerate the full preimage of `target`; exponential in `n'`, test-scale only.
    pub fn enumerate_preimage(&self, target: &BigUint) -> Vec<BitString> {
        let bits = self.input_bits();
        assert!(bits <= 24, "preimage enumeration only for tiny inputs");
        (0u64..1 << bits)
            .map(|v| BitString::from_value(&BigUint::from(v), bits))
            .filter(|v| self.embed(v).map(|h| &h == target).unwrap_or(false))
            .collect()
    }
}
