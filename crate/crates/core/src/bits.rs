use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A fixed-length bit string, most significant bit first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitString(vec![false; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        BitString((0..len).map(|_| rng.gen()).collect())
    }

    /// Big-endian encoding of `value` on exactly `len` bits. Higher bits are dropped.
    pub fn from_value(value: &BigUint, len: usize) -> Self {
        BitString((0..len).map(|i| value.bit((len - 1 - i) as u64)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    /// `sum_i y_i 2^(n-i)` with `i` counted from 1.
    pub fn iota(&self) -> BigUint {
        iota(&self.0)
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> Self {
        BitString(parts.into_iter().flat_map(|p| p.0.iter().copied()).collect())
    }
}

pub(crate) fn iota(bits: &[bool]) -> BigUint {
    let mut v = BigUint::default();
    for &b in bits {
        v <<= 1u32;
        if b {
            v |= BigUint::from(1u32);
        }
    }
    v
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid bit string character {0:?}")]
pub struct ParseBitStringError(char);

impl FromStr for BitString {
    type Err = ParseBitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ParseBitStringError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn iota_examples() {
        assert_eq!(bs("101").iota(), BigUint::from(5u32));
        assert_eq!(bs("000").iota(), BigUint::from(0u32));
        assert_eq!(bs("10").iota(), BigUint::from(2u32));
    }

    #[test]
    fn encode_decode() {
        let v = BigUint::from(4u32);
        let b = BitString::from_value(&v, 3);
        assert_eq!(b.to_string(), "100");
        assert_eq!(b.iota(), v);
        assert!("10x".parse::<BitString>().is_err());
    }
}
