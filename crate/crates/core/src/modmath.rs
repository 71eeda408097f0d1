//! Modular arithmetic over safe-prime groups.
//!
//! Everything here is deterministic: the group for a given security size is
//! fixed by scanning for the smallest safe prime, and the generator is the
//! smallest integer of the right order. The discrete logarithm is computed by
//! baby-step/giant-step and stands in for the quantum feature extractor.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModMathError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no safe prime 2q+1 with q an odd {0}-bit prime")]
    NoSafePrime(u32),
    #[error("element {0} is not a member of the order-q subgroup")]
    NotInSubgroup(BigUint),
    #[error("group order has {bits} bits, discrete-log budget is {budget} bits")]
    Capacity { bits: u64, budget: u64 },
}

/// Witnesses that make Miller-Rabin deterministic below 3.3e24.
const DETERMINISTIC_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Additional prime witnesses used above the deterministic range.
pub const DEFAULT_EXTRA_ROUNDS: usize = 16;

/// Largest group order (in bits) the baby-step/giant-step solver accepts by default.
pub const DEFAULT_DLOG_BUDGET_BITS: u64 = 40;

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(base: u64, exp: &BigUint, m: u64) -> u64 {
    let mut result = 1 % m;
    let mut acc = base % m;
    for digit in exp.iter_u64_digits() {
        let mut d = digit;
        for _ in 0..64 {
            if d & 1 == 1 {
                result = mul_mod_u64(result, acc, m);
            }
            acc = mul_mod_u64(acc, acc, m);
            d >>= 1;
        }
    }
    result
}

/// `base^exp mod modulus` by square-and-multiply.
pub fn mod_pow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> Result<BigUint, ModMathError> {
    if *modulus < BigUint::from(2u32) {
        return Err(ModMathError::InvalidArgument(format!("modulus {modulus} < 2")));
    }
    Ok(mod_pow_unchecked(base, exp, modulus))
}

/// Same as [`mod_pow`] for a modulus already known to be at least 2.
pub(crate) fn mod_pow_unchecked(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> BigUint {
    match modulus.to_u64() {
        Some(m) => {
            let b = (base % modulus).to_u64().unwrap_or(0);
            BigUint::from(pow_mod_u64(b, exp, m))
        }
        None => base.modpow(exp, modulus),
    }
}

/// Modular inverse via the extended Euclidean algorithm, if it exists.
pub fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let m = BigInt::from(modulus.clone());
    let e = BigInt::from(a % modulus).extended_gcd(&m);
    if !e.gcd.is_one() {
        return None;
    }
    e.x.mod_floor(&m).to_biguint()
}

fn miller_rabin_round(n: &BigUint, d: &BigUint, s: u64, witness: &BigUint) -> bool {
    let n_minus_one = n - 1u32;
    let a = witness % n;
    if a.is_zero() || a.is_one() || a == n_minus_one {
        return true;
    }
    let mut x = mod_pow_unchecked(&a, d, n);
    if x.is_one() || x == n_minus_one {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if x == n_minus_one {
            return true;
        }
        if x.is_one() {
            return false;
        }
    }
    false
}

/// Miller-Rabin with the fixed 12-prime witness set plus `extra_rounds`
/// further prime witnesses. Exact below 3.3e24.
pub fn is_probable_prime(n: &BigUint, extra_rounds: usize) -> bool {
    if *n < BigUint::from(2u32) {
        return false;
    }
    for &p in DETERMINISTIC_WITNESSES.iter() {
        if *n == BigUint::from(p) {
            return true;
        }
        if (n % p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    let deterministic = n.bits() <= 81;
    let extra = if deterministic { 0 } else { extra_rounds };
    DETERMINISTIC_WITNESSES
        .iter()
        .copied()
        .chain(extra_witnesses().take(extra))
        .all(|w| miller_rabin_round(n, &d, s, &BigUint::from(w)))
}

fn extra_witnesses() -> impl Iterator<Item = u64> {
    (41u64..).filter(|&k| (2..k).take_while(|d| d * d <= k).all(|d| k % d != 0))
}

pub fn is_prime(n: &BigUint) -> bool {
    is_probable_prime(n, DEFAULT_EXTRA_ROUNDS)
}

/// Smallest odd `n`-bit prime `q` with `2q + 1` prime, scanning upward from
/// `2^(n-1)`. Returns `(2q + 1, q)`.
pub fn gen_safe_prime(n: u32) -> Result<(BigUint, BigUint), ModMathError> {
    if n < 2 {
        return Err(ModMathError::InvalidArgument(format!("security size {n} < 2")));
    }
    let upper = BigUint::one() << n;
    let mut q = (BigUint::one() << (n - 1)) | BigUint::one();
    while q < upper {
        if is_prime(&q) {
            let p = (&q << 1u32) + 1u32;
            if is_prime(&p) {
                return Ok((p, q));
            }
        }
        q += 2u32;
    }
    Err(ModMathError::NoSafePrime(n))
}

/// A cyclic group: the order-`q` subgroup of `Z_p^*` with `p = 2q + 1`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDescription {
    pub n: u32,
    #[serde(with = "decimal")]
    pub p: BigUint,
    #[serde(with = "decimal")]
    pub q: BigUint,
    #[serde(with = "decimal")]
    pub g: BigUint,
}

impl fmt::Debug for GroupDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Group(n={}, p={}, q={}, g={})", self.n, self.p, self.q, self.g)
    }
}

/// Deterministic group generation: safe prime from [`gen_safe_prime`], then the
/// smallest `g > 1` with `g^q = 1 mod p`.
pub fn group_gen(n: u32) -> Result<GroupDescription, ModMathError> {
    let (p, q) = gen_safe_prime(n)?;
    let mut g = BigUint::from(2u32);
    while mod_pow_unchecked(&g, &q, &p) != BigUint::one() {
        g += 1u32;
    }
    Ok(GroupDescription { n, p, q, g })
}

impl GroupDescription {
    /// Euler-criterion membership test: `1 <= h < p` and `h^q = 1 mod p`.
    pub fn contains(&self, h: &BigUint) -> bool {
        !h.is_zero() && *h < self.p && mod_pow_unchecked(h, &self.q, &self.p).is_one()
    }

    pub fn ensure_member(&self, h: &BigUint) -> Result<(), ModMathError> {
        if self.contains(h) {
            Ok(())
        } else {
            Err(ModMathError::NotInSubgroup(h.clone()))
        }
    }

    pub fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        mod_pow_unchecked(base, exp, &self.p)
    }

    /// `g^exp`.
    pub fn gen_pow(&self, exp: &BigUint) -> BigUint {
        self.pow(&self.g, exp)
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    /// Inverse of a subgroup member, `h^(q-1)`.
    pub fn inv(&self, h: &BigUint) -> BigUint {
        self.pow(h, &(&self.q - 1u32))
    }

    /// Uniform exponent in `Z_q`.
    pub fn random_exponent<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        use num_bigint::RandBigInt;
        rng.gen_biguint_below(&self.q)
    }

    /// Uniform subgroup member.
    pub fn random_element<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        let r = self.random_exponent(rng);
        self.gen_pow(&r)
    }

    /// All subgroup members as `g^0, g^1, ..., g^(q-1)`. Only sensible for small groups.
    pub fn elements(&self) -> Vec<BigUint> {
        let q = self.q.to_u64().expect("enumeration needs a small group");
        let mut out = Vec::with_capacity(q as usize);
        let mut h = BigUint::one();
        for _ in 0..q {
            out.push(h.clone());
            h = self.mul(&h, &self.g);
        }
        out
    }
}

/// Baby-step/giant-step discrete logarithm with the default budget.
pub fn discrete_log(group: &GroupDescription, h: &BigUint) -> Result<BigUint, ModMathError> {
    discrete_log_with_budget(group, h, DEFAULT_DLOG_BUDGET_BITS)
}

/// Returns `r` in `[0, q)` with `g^r = h mod p`. Time and memory are `O(sqrt q)`.
pub fn discrete_log_with_budget(
    group: &GroupDescription,
    h: &BigUint,
    budget_bits: u64,
) -> Result<BigUint, ModMathError> {
    let bits = group.q.bits();
    if bits > budget_bits || bits > 62 {
        return Err(ModMathError::Capacity { bits, budget: budget_bits.min(62) });
    }
    group.ensure_member(h)?;
    let p = group.p.to_u64().expect("p fits in u64 under the budget");
    let q = group.q.to_u64().expect("q fits in u64 under the budget");
    let g = group.g.to_u64().expect("g < p");
    let target = h.to_u64().expect("h < p");

    let m = (q as f64).sqrt().ceil() as u64;
    let mut baby = HashMap::with_capacity(m as usize);
    let mut cur = 1u64;
    for j in 0..m {
        baby.entry(cur).or_insert(j);
        cur = mul_mod_u64(cur, g, p);
    }
    // g^(-m) = g^(q - m mod q)
    let stride = pow_mod_u64(g, &BigUint::from((q - m % q) % q), p);
    let mut gamma = target;
    for i in 0..=m {
        if let Some(&j) = baby.get(&gamma) {
            return Ok(BigUint::from((i * m + j) % q));
        }
        gamma = mul_mod_u64(gamma, stride, p);
    }
    // Unreachable for members: i*m + j covers [0, q).
    Err(ModMathError::NotInSubgroup(h.clone()))
}

/// Decimal-string serde for big integers at external boundaries.
pub mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("bad integer {s:?}")))
    }

    pub mod vec {
        use num_bigint::BigUint;
        use serde::{de::Error, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|s| BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("bad integer {s:?}"))))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn safe_primes_small_sizes() {
        assert_eq!(gen_safe_prime(2).unwrap(), (big(7), big(3)));
        assert_eq!(gen_safe_prime(3).unwrap(), (big(11), big(5)));
        assert_eq!(gen_safe_prime(4).unwrap(), (big(23), big(11)));
        assert!(matches!(gen_safe_prime(1), Err(ModMathError::InvalidArgument(_))));
    }

    #[test]
    fn group_gen_small_sizes() {
        let g2 = group_gen(2).unwrap();
        assert_eq!((g2.p.clone(), g2.q.clone(), g2.g.clone()), (big(7), big(3), big(2)));
        let g3 = group_gen(3).unwrap();
        assert_eq!((g3.p.clone(), g3.q.clone(), g3.g.clone()), (big(11), big(5), big(3)));
        let g4 = group_gen(4).unwrap();
        assert_eq!((g4.p.clone(), g4.q.clone(), g4.g.clone()), (big(23), big(11), big(2)));
    }

    #[test]
    fn group_invariants_hold_up_to_48_bits() {
        for n in 2..=48 {
            let grp = group_gen(n).unwrap();
            assert!(is_prime(&grp.p) && is_prime(&grp.q));
            assert_eq!(grp.p, &grp.q * 2u32 + 1u32);
            assert_eq!(grp.q.bits(), n as u64);
            assert!(grp.q.is_odd());
            assert!(!grp.g.is_one());
            assert!(grp.contains(&grp.g));
            assert_eq!(group_gen(n).unwrap(), grp);
        }
    }

    #[test]
    fn mod_pow_examples() {
        assert_eq!(mod_pow(&big(3), &big(5), &big(11)).unwrap(), big(1));
        assert_eq!(mod_pow(&big(8), &big(27), &big(55)).unwrap(), big(2));
        assert_eq!(mod_pow(&big(12345), &big(0), &big(97)).unwrap(), big(1));
        assert!(mod_pow(&big(3), &big(5), &big(1)).is_err());
        // Wide modulus takes the big-integer path.
        let m = (BigUint::one() << 100u32) + 277u32;
        let r = mod_pow(&big(3), &big(200), &m).unwrap();
        assert_eq!(r, big(3).pow(200u32) % &m);
    }

    #[test]
    fn primality_matches_trial_division_below_a_million() {
        for n in 0..1_000_000u64 {
            assert_eq!(is_prime(&big(n)), trial_division(n), "n = {n}");
        }
    }

    #[test]
    fn discrete_log_examples() {
        let g2 = group_gen(2).unwrap();
        assert_eq!(discrete_log(&g2, &big(4)).unwrap(), big(2));
        assert_eq!(discrete_log(&g2, &big(1)).unwrap(), big(0));
        let g3 = group_gen(3).unwrap();
        assert_eq!(discrete_log(&g3, &big(9)).unwrap(), big(2));
        assert!(matches!(discrete_log(&g2, &big(3)), Err(ModMathError::NotInSubgroup(_))));
        let g44 = group_gen(44).unwrap();
        assert!(matches!(discrete_log(&g44, &big(1)), Err(ModMathError::Capacity { .. })));
    }

    #[test]
    fn group_description_json_uses_decimal_strings() {
        let g = group_gen(4).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"n":4,"p":"23","q":"11","g":"2"}"#);
        let back: GroupDescription = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(&big(3), &big(40)).unwrap(), big(27));
        assert!(mod_inverse(&big(4), &big(40)).is_none());
    }

    proptest! {
        #[test]
        fn dlog_round_trip(n in 2u32..=32, r_seed in any::<u64>()) {
            let grp = group_gen(n).unwrap();
            let r = big(r_seed) % &grp.q;
            let h = grp.gen_pow(&r);
            prop_assert_eq!(discrete_log(&grp, &h).unwrap(), r);
        }

        #[test]
        fn subgroup_closed_under_products_and_inverses(n in 2u32..=24, a in any::<u64>(), b in any::<u64>()) {
            let grp = group_gen(n).unwrap();
            let x = grp.gen_pow(&big(a));
            let y = grp.gen_pow(&big(b));
            prop_assert!(grp.contains(&grp.mul(&x, &y)));
            let xi = grp.inv(&x);
            prop_assert!(grp.contains(&xi));
            prop_assert!(grp.mul(&x, &xi).is_one());
        }
    }
}
