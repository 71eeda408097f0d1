//! Q-time circular DDH tuples and the rerandomization that builds them from a
//! single-shot tuple.

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EekError;
use crate::bits::BitString;
use crate::modmath::GroupDescription;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TupleKind {
    Real,
    Random,
}

/// `(g^iota(s), {(C_ij, Z_ij)})` with `columns[j][i]` holding the pair for
/// key bit `i` in repetition `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircularTuple {
    pub public: BigUint,
    pub columns: Vec<Vec<(BigUint, BigUint)>>,
    pub kind: TupleKind,
}

impl CircularTuple {
    pub fn repetitions(&self) -> usize {
        self.columns.len()
    }

    /// ElGamal decryption of every entry with secret exponent `key`:
    /// `Z * C^(-key)`, read as bit 0 for `1`, bit 1 for `g`, `None` otherwise.
    pub fn decrypt(&self, group: &GroupDescription, key: &BigUint) -> Vec<Vec<Option<bool>>> {
        let neg_key = (&group.q - key % &group.q) % &group.q;
        self.columns
            .iter()
            .map(|col| {
                col.iter()
                    .map(|(c, z)| {
                        let m = group.mul(z, &group.pow(c, &neg_key));
                        if m.is_one() {
                            Some(false)
                        } else if m == group.g {
                            Some(true)
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn all_members(&self, group: &GroupDescription) -> bool {
        group.contains(&self.public)
            && self.columns.iter().flatten().all(|(c, z)| group.contains(c) && group.contains(z))
    }
}

/// Samples a tuple and also returns the exponents `b_ij` behind each `C_ij`.
pub fn sample_circular_with_trapdoor<R: Rng + ?Sized>(
    group: &GroupDescription,
    secret: &BitString,
    repetitions: usize,
    kind: TupleKind,
    rng: &mut R,
) -> Result<(CircularTuple, Vec<Vec<BigUint>>), EekError> {
    if repetitions == 0 {
        return Err(EekError::InvalidArgument("need at least one repetition".into()));
    }
    if secret.len() != group.n as usize {
        return Err(EekError::InvalidArgument(format!("secret has {} bits, expected {}", secret.len(), group.n)));
    }
    let s = secret.iota() % &group.q;
    let public = group.gen_pow(&s);
    let mut exponents = Vec::with_capacity(repetitions);
    let mut columns = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let mut col = Vec::with_capacity(secret.len());
        let mut col_b = Vec::with_capacity(secret.len());
        for &bit in secret.bits() {
            let b = group.random_exponent(rng);
            let c = group.gen_pow(&b);
            let z = match kind {
                TupleKind::Real => {
                    let masked = group.gen_pow(&((&b * &s) % &group.q));
                    if bit {
                        group.mul(&masked, &group.g)
                    } else {
                        masked
                    }
                }
                TupleKind::Random => group.random_element(rng),
            };
            col.push((c, z));
            col_b.push(b);
        }
        columns.push(col);
        exponents.push(col_b);
    }
    Ok((CircularTuple { public, columns, kind }, exponents))
}

/// Real: `(g^b, g^(b iota(s)) g^(s_i))`; random: `(g^b, g^c)`, fresh exponents per entry.
pub fn sample_circular<R: Rng + ?Sized>(
    group: &GroupDescription,
    secret: &BitString,
    repetitions: usize,
    kind: TupleKind,
    rng: &mut R,
) -> Result<CircularTuple, EekError> {
    sample_circular_with_trapdoor(group, secret, repetitions, kind, rng).map(|(t, _)| t)
}

/// Expands a single-shot tuple to `repetitions` columns with fresh offsets
/// `r_ij`: `C_ij = C_i g^r_ij`, `Z_ij = Z_i (g^iota(s))^r_ij`.
pub fn rerandomize<R: Rng + ?Sized>(
    group: &GroupDescription,
    base: &CircularTuple,
    repetitions: usize,
    rng: &mut R,
) -> Result<CircularTuple, EekError> {
    let width = base.columns.first().map_or(0, Vec::len);
    let offsets: Vec<Vec<BigUint>> =
        (0..repetitions).map(|_| (0..width).map(|_| group.random_exponent(rng)).collect()).collect();
    rerandomize_with(group, base, &offsets)
}

/// [`rerandomize`] with caller-chosen offsets, `offsets[j][i]`.
pub fn rerandomize_with(
    group: &GroupDescription,
    base: &CircularTuple,
    offsets: &[Vec<BigUint>],
) -> Result<CircularTuple, EekError> {
    if base.columns.len() != 1 {
        return Err(EekError::InvalidArgument(format!(
            "rerandomization starts from a single-shot tuple, got {} columns",
            base.columns.len()
        )));
    }
    if offsets.is_empty() {
        return Err(EekError::InvalidArgument("need at least one repetition".into()));
    }
    let pairs = &base.columns[0];
    let columns = offsets
        .iter()
        .map(|row| {
            if row.len() != pairs.len() {
                return Err(EekError::InvalidArgument("offset row width mismatch".into()));
            }
            Ok(pairs
                .iter()
                .zip(row)
                .map(|((c, z), r)| (group.mul(c, &group.gen_pow(r)), group.mul(z, &group.pow(&base.public, r))))
                .collect())
        })
        .collect::<Result<Vec<_>, EekError>>()?;
    Ok(CircularTuple { public: base.public.clone(), columns, kind: base.kind })
}
