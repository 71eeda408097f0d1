//! ElGamal Encrypted Key concept classes.
//!
//! A concept is indexed by a secret key `y` of `n` bits. On inputs
//! `h_1..h_n` from the order-`q` subgroup it outputs the public key
//! `g^iota(y)` together with bitwise encryptions `h_i^iota(y) * g^(y_i)`.
//! The binary variant feeds bit strings through a concept-friendly embedding
//! first, so the input distribution no longer depends on the group.

mod circular;
mod embedding;

pub use circular::{rerandomize, rerandomize_with, sample_circular, sample_circular_with_trapdoor, CircularTuple, TupleKind};
pub use embedding::{chunk_count_for, Embedding};

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::modmath::{GroupDescription, ModMathError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EekError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Group(#[from] ModMathError),
}

/// Secret key `y in {0,1}^n` over the group for security size `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EekConcept {
    group: GroupDescription,
    key: BitString,
}

impl EekConcept {
    pub fn new(group: GroupDescription, key: BitString) -> Result<Self, EekError> {
        if key.len() != group.n as usize {
            return Err(EekError::InvalidArgument(format!(
                "key has {} bits, group security size is {}",
                key.len(),
                group.n
            )));
        }
        Ok(EekConcept { group, key })
    }

    pub fn random<R: Rng + ?Sized>(group: GroupDescription, rng: &mut R) -> Self {
        let key = BitString::random(group.n as usize, rng);
        EekConcept { group, key }
    }

    pub fn group(&self) -> &GroupDescription {
        &self.group
    }

    pub fn key(&self) -> &BitString {
        &self.key
    }

    /// `iota(y) mod q`.
    pub fn key_exponent(&self) -> BigUint {
        self.key.iota() % &self.group.q
    }

    pub fn public_key(&self) -> BigUint {
        self.group.gen_pow(&self.key_exponent())
    }
}

/// Concept output: public part plus one ciphertext component per input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EekLabel {
    #[serde(with = "crate::modmath::decimal")]
    pub public: BigUint,
    #[serde(with = "crate::modmath::decimal::vec")]
    pub ciphertexts: Vec<BigUint>,
}

impl EekLabel {
    /// The all-ones label of `n + 1` components.
    pub fn sentinel(n: usize) -> Self {
        EekLabel { public: BigUint::one(), ciphertexts: vec![BigUint::one(); n] }
    }

    pub fn is_sentinel(&self) -> bool {
        self.public.is_one() && self.ciphertexts.iter().all(|c| c.is_one())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EekSample {
    #[serde(with = "crate::modmath::decimal::vec")]
    pub inputs: Vec<BigUint>,
    pub label: EekLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeekSample {
    pub inputs: Vec<BitString>,
    pub label: EekLabel,
}

fn check_arity(concept: &EekConcept, len: usize) -> Result<(), EekError> {
    let n = concept.group.n as usize;
    if len != n {
        return Err(EekError::InvalidArgument(format!("expected {n} inputs, got {len}")));
    }
    Ok(())
}

/// `c_y(h_1..h_n) = (g^iota(y), {h_i^iota(y) * g^(y_i)})`.
pub fn eval_eek(concept: &EekConcept, inputs: &[BigUint]) -> Result<EekLabel, EekError> {
    check_arity(concept, inputs.len())?;
    let group = &concept.group;
    for h in inputs {
        group.ensure_member(h)?;
    }
    Ok(eval_members(concept, &concept.key_exponent(), inputs))
}

pub(crate) fn eval_members(concept: &EekConcept, exponent: &BigUint, inputs: &[BigUint]) -> EekLabel {
    let group = &concept.group;
    let ciphertexts = inputs
        .iter()
        .zip(concept.key.bits())
        .map(|(h, &bit)| {
            let masked = group.pow(h, exponent);
            if bit {
                group.mul(&masked, &group.g)
            } else {
                masked
            }
        })
        .collect();
    EekLabel { public: group.gen_pow(exponent), ciphertexts }
}

/// Uniform input tuple from `G^n`.
pub fn random_inputs<R: Rng + ?Sized>(group: &GroupDescription, rng: &mut R) -> Vec<BigUint> {
    (0..group.n).map(|_| group.random_element(rng)).collect()
}

/// Binary variant: embed each `z_i`; any identity embedding yields the sentinel.
pub fn eval_beek(concept: &EekConcept, embedding: &Embedding, inputs: &[BitString]) -> Result<EekLabel, EekError> {
    check_arity(concept, inputs.len())?;
    let mut embedded = Vec::with_capacity(inputs.len());
    for z in inputs {
        let h = embedding.embed(z)?;
        if h.is_one() {
            return Ok(EekLabel::sentinel(inputs.len()));
        }
        embedded.push(h);
    }
    Ok(eval_members(concept, &concept.key_exponent(), &embedded))
}

/// Turns EEK samples into BEEK samples without knowing the key: fresh `z_i`
/// are drawn, and if none embeds to the identity they are replaced by uniform
/// preimages of the original `h_i` while the label is kept. An identity among
/// the `h_i` has no non-degenerate preimage, so that sample becomes the sentinel.
pub fn beek_from_eek_samples<R: Rng + ?Sized>(
    embedding: &Embedding,
    samples: &[EekSample],
    rng: &mut R,
) -> Result<Vec<BeekSample>, EekError> {
    let n = embedding.group().n as usize;
    samples
        .iter()
        .map(|sample| {
            if sample.inputs.len() != n {
                return Err(EekError::InvalidArgument(format!("expected {n} inputs, got {}", sample.inputs.len())));
            }
            let fresh: Vec<BitString> = (0..n).map(|_| BitString::random(embedding.input_bits(), rng)).collect();
            let mut degenerate = false;
            for z in &fresh {
                if embedding.embed(z)?.is_one() {
                    degenerate = true;
                    break;
                }
            }
            if degenerate {
                return Ok(BeekSample { inputs: fresh, label: EekLabel::sentinel(n) });
            }
            let mut identity = false;
            let mut inputs = Vec::with_capacity(n);
            for h in &sample.inputs {
                if h.is_one() {
                    identity = true;
                    inputs.push(embedding.sample_identity_preimage(rng));
                } else {
                    inputs.push(embedding.sample_preimage(h, rng)?);
                }
            }
            let label = if identity { EekLabel::sentinel(n) } else { sample.label.clone() };
            Ok(BeekSample { inputs, label })
        })
        .collect()
}
