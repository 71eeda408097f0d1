//! Discrete cube roots modulo 3-RSA integers and the semi-supervised learner.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learning::{CrossCheck, FeatureExtractor, Hypothesis, LearnError, Provenance};
use crate::modmath::{is_prime, mod_inverse, mod_pow};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DcrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("({p}, {q}) is not a 3-RSA factor pair: {reason}")]
    NotThreeRsa { p: BigUint, q: BigUint, reason: String },
    #[error("{0} is not a product of two distinct odd primes")]
    NotSemiprime(BigUint),
    #[error("{0} is unknown to the registry and beyond the trial-division budget")]
    Capacity(BigUint),
    #[error("labeled examples disagree on the offset ({first} vs {other})")]
    InconsistentOffset { first: BigUint, other: BigUint },
    #[error("dataset mixes moduli {0} and {1}")]
    MixedModuli(BigUint, BigUint),
}

impl From<DcrError> for LearnError {
    fn from(e: DcrError) -> Self {
        match e {
            DcrError::InconsistentOffset { .. } | DcrError::MixedModuli(..) => LearnError::LearningFailure(e.to_string()),
            other => LearnError::InvalidArgument(other.to_string()),
        }
    }
}

/// `N = p q` with both `p - 1` and `q - 1` prime to 3, and `d = 3^-1 mod (p-1)(q-1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreeRsa {
    #[serde(with = "crate::modmath::decimal")]
    pub modulus: BigUint,
    #[serde(with = "crate::modmath::decimal")]
    pub p: BigUint,
    #[serde(with = "crate::modmath::decimal")]
    pub q: BigUint,
    #[serde(with = "crate::modmath::decimal")]
    pub d: BigUint,
}

fn three_rsa_condition(p: &BigUint) -> bool {
    !((p - 1u32) % 3u32).is_zero()
}

impl ThreeRsa {
    pub fn from_factors(p: BigUint, q: BigUint) -> Result<Self, DcrError> {
        let reject = |reason: &str| DcrError::NotThreeRsa { p: p.clone(), q: q.clone(), reason: reason.into() };
        if p == q {
            return Err(reject("factors must differ"));
        }
        for f in [&p, &q] {
            if f.is_even() || !is_prime(f) {
                return Err(reject("factors must be odd primes"));
            }
            if !three_rsa_condition(f) {
                return Err(reject("3 divides a factor minus one"));
            }
        }
        let phi = (&p - 1u32) * (&q - 1u32);
        let d = mod_inverse(&BigUint::from(3u32), &phi).ok_or_else(|| reject("3 is not invertible"))?;
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        Ok(ThreeRsa { modulus: &p * &q, p, q, d })
    }

    /// `x^d mod N`.
    pub fn cube_root(&self, x: &BigUint) -> BigUint {
        mod_pow(x, &self.d, &self.modulus).expect("modulus is at least 15")
    }
}

/// Random 3-RSA modulus of exactly `bits` bits, deterministic in `seed`.
pub fn gen_3rsa(bits: u32, seed: u64) -> Result<ThreeRsa, DcrError> {
    if bits < 6 {
        return Err(DcrError::InvalidArgument(format!("need at least 6 bits, got {bits}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_3rsa_with(bits, &mut rng)
}

pub fn gen_3rsa_with<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<ThreeRsa, DcrError> {
    if bits < 6 {
        return Err(DcrError::InvalidArgument(format!("need at least 6 bits, got {bits}")));
    }
    let half = bits / 2;
    let p_lo = (BigUint::one() << (half - 1)).max(BigUint::from(3u32));
    let p_hi = BigUint::one() << half;
    let n_lo = BigUint::one() << (bits - 1);
    let n_hi = BigUint::one() << bits;
    loop {
        let p = rng.gen_biguint_range(&p_lo, &p_hi);
        if p.is_even() || !three_rsa_condition(&p) || !is_prime(&p) {
            continue;
        }
        // q with p q in [2^(bits-1), 2^bits).
        let q_lo = n_lo.div_ceil(&p);
        let q_hi = (&n_hi - 1u32) / &p + 1u32;
        if q_lo >= q_hi {
            continue;
        }
        for _ in 0..64 * bits {
            let q = rng.gen_biguint_range(&q_lo, &q_hi);
            if q != p && q.is_odd() && three_rsa_condition(&q) && is_prime(&q) {
                return ThreeRsa::from_factors(p, q);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcrConcept {
    pub key: ThreeRsa,
    #[serde(with = "crate::modmath::decimal")]
    pub k: BigUint,
}

impl DcrConcept {
    pub fn new(key: ThreeRsa, k: BigUint) -> Result<Self, DcrError> {
        if k >= key.modulus {
            return Err(DcrError::InvalidArgument("offset must lie in Z_N".into()));
        }
        Ok(DcrConcept { key, k })
    }

    pub fn random<R: Rng + ?Sized>(key: ThreeRsa, rng: &mut R) -> Self {
        let k = rng.gen_biguint_below(&key.modulus);
        DcrConcept { key, k }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.key.modulus
    }
}

fn check_residue(x: &BigUint, modulus: &BigUint) -> Result<(), DcrError> {
    if x >= modulus {
        return Err(DcrError::InvalidArgument(format!("{x} is not below the modulus {modulus}")));
    }
    Ok(())
}

/// `(x^d + k) mod N`.
pub fn eval_dcr(concept: &DcrConcept, x: &BigUint) -> Result<BigUint, DcrError> {
    check_residue(x, concept.modulus())?;
    Ok((concept.key.cube_root(x) + &concept.k) % concept.modulus())
}

/// A point `(x, N)` of the input distribution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DcrInput {
    #[serde(with = "crate::modmath::decimal")]
    pub x: BigUint,
    #[serde(with = "crate::modmath::decimal")]
    pub modulus: BigUint,
}

pub type FactorPair = (BigUint, BigUint);

/// Factors of moduli produced by this crate, keyed by `N`. Entries are only
/// ever added.
#[derive(Debug, Default)]
pub struct FactorRegistry {
    known: RwLock<HashMap<BigUint, FactorPair>>,
}

impl FactorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, key: &ThreeRsa) {
        let mut known = self.known.write().expect("registry lock");
        known.entry(key.modulus.clone()).or_insert_with(|| (key.p.clone(), key.q.clone()));
    }

    pub fn lookup(&self, modulus: &BigUint) -> Option<FactorPair> {
        self.known.read().expect("registry lock").get(modulus).cloned()
    }

    pub fn len(&self) -> usize {
        self.known.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Largest trial divisor tried for moduli missing from the registry.
pub const DEFAULT_TRIAL_DIVISION_BOUND: u64 = 1 << 24;

/// Stand-in for quantum factoring: registry lookup, then trial division.
#[derive(Debug, Clone)]
pub struct DcrFeatureExtractor {
    registry: Arc<FactorRegistry>,
    trial_bound: u64,
}

impl DcrFeatureExtractor {
    pub fn new(registry: Arc<FactorRegistry>) -> Self {
        DcrFeatureExtractor { registry, trial_bound: DEFAULT_TRIAL_DIVISION_BOUND }
    }

    pub fn with_trial_bound(registry: Arc<FactorRegistry>, trial_bound: u64) -> Self {
        DcrFeatureExtractor { registry, trial_bound }
    }
}

impl FeatureExtractor for DcrFeatureExtractor {
    type Input = DcrInput;
    type Features = FactorPair;

    fn extract(&self, input: &DcrInput) -> Result<FactorPair, LearnError> {
        Ok(dcr_feature_extract(&self.registry, self.trial_bound, input)?)
    }
}

pub fn dcr_feature_extract(registry: &FactorRegistry, trial_bound: u64, input: &DcrInput) -> Result<FactorPair, DcrError> {
    let n = &input.modulus;
    if let Some(f) = registry.lookup(n) {
        return Ok(f);
    }
    let not_semiprime = || DcrError::NotSemiprime(n.clone());
    let limit = n.sqrt().to_u64().unwrap_or(u64::MAX);
    if limit > trial_bound {
        return Err(DcrError::Capacity(n.clone()));
    }
    let n64 = n.to_u64().ok_or_else(|| DcrError::Capacity(n.clone()))?;
    if n64 < 15 || n64 % 2 == 0 {
        return Err(not_semiprime());
    }
    let mut d = 3u64;
    while d <= limit {
        if n64 % d == 0 {
            let other = n64 / d;
            let (p, q) = (BigUint::from(d), BigUint::from(other));
            if d != other && is_prime(&p) && is_prime(&q) {
                return Ok((p, q));
            }
            return Err(not_semiprime());
        }
        d += 2;
    }
    Err(not_semiprime())
}

#[derive(Debug, Clone)]
pub struct DcrHypothesis {
    key: ThreeRsa,
    k: BigUint,
    provenance: Provenance,
}

impl DcrHypothesis {
    pub fn offset(&self) -> &BigUint {
        &self.k
    }

    pub fn modulus(&self) -> &BigUint {
        &self.key.modulus
    }
}

impl Hypothesis for DcrHypothesis {
    type Input = DcrInput;
    type Label = BigUint;

    fn predict(&self, input: &DcrInput) -> Result<BigUint, LearnError> {
        if input.modulus != self.key.modulus {
            return Err(DcrError::MixedModuli(self.key.modulus.clone(), input.modulus.clone()).into());
        }
        check_residue(&input.x, &input.modulus)?;
        Ok((self.key.cube_root(&input.x) + &self.k) % &self.key.modulus)
    }

    fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Factors come from the unlabeled featured set, the offset from labeled pairs.
pub fn dcr_semisupervised_learn(
    featured: &[(DcrInput, FactorPair)],
    labeled: &[(DcrInput, BigUint)],
) -> Result<DcrHypothesis, DcrError> {
    let ((first, (p, q)), rest) =
        featured.split_first().ok_or_else(|| DcrError::InvalidArgument("need at least one featured example".into()))?;
    if labeled.is_empty() {
        return Err(DcrError::InvalidArgument("need at least one labeled example".into()));
    }
    let modulus = &first.modulus;
    for x in rest.iter().map(|(x, _)| x).chain(labeled.iter().map(|(x, _)| x)) {
        if &x.modulus != modulus {
            return Err(DcrError::MixedModuli(modulus.clone(), x.modulus.clone()));
        }
    }
    let key = ThreeRsa::from_factors(p.clone(), q.clone())?;
    if &key.modulus != modulus {
        return Err(DcrError::NotSemiprime(modulus.clone()));
    }
    let mut k: Option<BigUint> = None;
    let mut check = CrossCheck::default();
    for (x, y) in labeled {
        check_residue(&x.x, modulus)?;
        check_residue(y, modulus)?;
        let root = key.cube_root(&x.x);
        let candidate = (y + modulus - root) % modulus;
        match &k {
            None => k = Some(candidate),
            Some(first) if *first == candidate => check.agreeing += 1,
            Some(first) => return Err(DcrError::InconsistentOffset { first: first.clone(), other: candidate }),
        }
    }
    let provenance = Provenance {
        learner: "dcr-semisupervised".into(),
        train_size: featured.len() + labeled.len(),
        used_example: 0,
        cross_check: check,
    };
    Ok(DcrHypothesis { key, k: k.expect("labeled set is non-empty"), provenance })
}

/// Moduli up to this size are tested on every residue.
pub const EXHAUSTIVE_MAX_MODULUS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcrDemoReport {
    pub bits: u32,
    #[serde(with = "crate::modmath::decimal")]
    pub modulus: BigUint,
    #[serde(with = "crate::modmath::decimal")]
    pub k_true: BigUint,
    #[serde(with = "crate::modmath::decimal")]
    pub k_learned: BigUint,
    pub featured: usize,
    pub labeled: usize,
    pub test_size: usize,
    pub exhaustive: bool,
    pub test_error: f64,
}

/// Generates a concept, learns it from disjoint featured and labeled draws,
/// and measures the error on every residue (small `N`) or `test_size` draws.
pub fn run_demo(bits: u32, labeled: usize, featured: usize, seed: u64, test_size: usize) -> Result<DcrDemoReport, LearnError> {
    if labeled == 0 || featured == 0 {
        return Err(LearnError::InvalidArgument("need at least one featured and one labeled example".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = gen_3rsa_with(bits, &mut rng)?;
    let concept = DcrConcept::random(key.clone(), &mut rng);
    let modulus = concept.modulus().clone();
    if BigUint::from((labeled + featured) as u64) > modulus {
        return Err(LearnError::InvalidArgument("more draws requested than residues".into()));
    }
    let registry = Arc::new(FactorRegistry::new());
    registry.register(&key);
    let extractor = DcrFeatureExtractor::new(registry);

    let mut seen = std::collections::HashSet::new();
    let mut fresh = |rng: &mut ChaCha8Rng| loop {
        let x = rng.gen_biguint_below(&modulus);
        if seen.insert(x.clone()) {
            return DcrInput { x, modulus: modulus.clone() };
        }
    };
    let mut featured_set = Vec::with_capacity(featured);
    for _ in 0..featured {
        let x = fresh(&mut rng);
        let f = extractor.extract(&x)?;
        featured_set.push((x, f));
    }
    let mut labeled_set = Vec::with_capacity(labeled);
    for _ in 0..labeled {
        let x = fresh(&mut rng);
        let y = eval_dcr(&concept, &x.x)?;
        labeled_set.push((x, y));
    }
    let h = dcr_semisupervised_learn(&featured_set, &labeled_set)?;

    let exhaustive = modulus <= BigUint::from(EXHAUSTIVE_MAX_MODULUS);
    let truth = |x: BigUint| {
        let y = eval_dcr(&concept, &x).expect("residue below modulus");
        (DcrInput { x, modulus: modulus.clone() }, y)
    };
    let (test_error, test_size) = if exhaustive {
        let m = modulus.to_usize().expect("small modulus");
        let oracle = (0..m as u64).map(|x| truth(BigUint::from(x)));
        (crate::learning::evaluate_hypothesis(&h, oracle, m), m)
    } else {
        let oracle: Vec<_> = (0..test_size).map(|_| truth(rng.gen_biguint_below(&modulus))).collect();
        (crate::learning::evaluate_hypothesis(&h, oracle, test_size), test_size)
    };
    Ok(DcrDemoReport {
        bits,
        modulus: modulus.clone(),
        k_true: concept.k.clone(),
        k_learned: h.offset().clone(),
        featured,
        labeled,
        test_size,
        exhaustive,
        test_error,
    })
}
