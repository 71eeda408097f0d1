//! Extended examples, feature extractors and the offline learners.
//!
//! A feature extractor only ever sees a single bare input. Hypotheses carry
//! no extractor, so deployment-time prediction cannot call one; the
//! [`CountingExtractor`] wrapper lets tests confirm the count stays put.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::eek::{eval_beek, eval_eek, random_inputs, EekConcept, EekError, EekLabel, Embedding};
use crate::modmath::{discrete_log_with_budget, GroupDescription, ModMathError, DEFAULT_DLOG_BUDGET_BITS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("inconsistent sample: component {index} decrypts to neither 1 nor g")]
    InconsistentSample { index: usize },
    #[error("learning failed: {0}")]
    LearningFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Eek(#[from] EekError),
    #[error(transparent)]
    Group(#[from] ModMathError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendedExample<I, F, L> {
    pub input: I,
    pub features: F,
    pub label: L,
}

pub trait FeatureExtractor {
    type Input: ?Sized;
    type Features;

    fn extract(&self, input: &Self::Input) -> Result<Self::Features, LearnError>;
}

/// Discrete logs of the `n` group elements, `E_n: G^n -> Z_q^n`.
#[derive(Debug, Clone)]
pub struct EekFeatureExtractor {
    group: GroupDescription,
    budget_bits: u64,
}

impl EekFeatureExtractor {
    pub fn new(group: GroupDescription) -> Self {
        EekFeatureExtractor { group, budget_bits: DEFAULT_DLOG_BUDGET_BITS }
    }

    pub fn with_budget(group: GroupDescription, budget_bits: u64) -> Self {
        EekFeatureExtractor { group, budget_bits }
    }
}

impl FeatureExtractor for EekFeatureExtractor {
    type Input = [BigUint];
    type Features = Vec<BigUint>;

    fn extract(&self, input: &[BigUint]) -> Result<Vec<BigUint>, LearnError> {
        input
            .iter()
            .map(|h| discrete_log_with_budget(&self.group, h, self.budget_bits).map_err(LearnError::from))
            .collect()
    }
}

/// Discrete logs of the embedded bit strings; the identity fallback maps to 0.
#[derive(Debug, Clone)]
pub struct BeekFeatureExtractor {
    embedding: Embedding,
}

impl BeekFeatureExtractor {
    pub fn new(embedding: Embedding) -> Self {
        BeekFeatureExtractor { embedding }
    }
}

impl FeatureExtractor for BeekFeatureExtractor {
    type Input = [BitString];
    type Features = Vec<BigUint>;

    fn extract(&self, input: &[BitString]) -> Result<Vec<BigUint>, LearnError> {
        let group = self.embedding.group();
        input
            .iter()
            .map(|z| {
                let h = self.embedding.embed(z)?;
                Ok(discrete_log_with_budget(group, &h, DEFAULT_DLOG_BUDGET_BITS)?)
            })
            .collect()
    }
}

/// Wraps an extractor and counts calls.
#[derive(Debug)]
pub struct CountingExtractor<E> {
    inner: E,
    calls: AtomicUsize,
}

impl<E> CountingExtractor<E> {
    pub fn new(inner: E) -> Self {
        CountingExtractor { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<E: FeatureExtractor> FeatureExtractor for CountingExtractor<E> {
    type Input = E::Input;
    type Features = E::Features;

    fn extract(&self, input: &E::Input) -> Result<E::Features, LearnError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.extract(input)
    }
}

pub fn extract_features_eek(group: &GroupDescription, inputs: &[BigUint]) -> Result<Vec<BigUint>, LearnError> {
    EekFeatureExtractor::new(group.clone()).extract(inputs)
}

/// Agreement of later training examples with the one used for learning.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub agreeing: usize,
    pub disagreeing: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub learner: String,
    pub train_size: usize,
    pub used_example: usize,
    pub cross_check: CrossCheck,
}

/// A deployed predictor: bare input in, label out.
pub trait Hypothesis {
    type Input: ?Sized;
    type Label: PartialEq;

    fn predict(&self, input: &Self::Input) -> Result<Self::Label, LearnError>;

    fn provenance(&self) -> &Provenance;
}

/// Sets `y_i = 1` iff `c_i * (g^iota(y))^(-r_i) = g`, `0` iff it is 1.
pub fn recover_key(group: &GroupDescription, label: &EekLabel, features: &[BigUint]) -> Result<BitString, LearnError> {
    if label.ciphertexts.len() != features.len() {
        return Err(LearnError::InvalidArgument(format!(
            "label has {} ciphertexts but {} features",
            label.ciphertexts.len(),
            features.len()
        )));
    }
    let bits = label
        .ciphertexts
        .iter()
        .zip(features)
        .enumerate()
        .map(|(index, (c, r))| {
            let neg = (&group.q - r % &group.q) % &group.q;
            let m = group.mul(c, &group.pow(&label.public, &neg));
            if m == group.g {
                Ok(true)
            } else if m.is_one() {
                Ok(false)
            } else {
                Err(LearnError::InconsistentSample { index })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BitString::new(bits))
}

pub type EekExample = ExtendedExample<Vec<BigUint>, Vec<BigUint>, EekLabel>;
pub type BeekExample = ExtendedExample<Vec<BitString>, Vec<BigUint>, EekLabel>;

#[derive(Debug, Clone)]
pub struct EekHypothesis {
    concept: EekConcept,
    provenance: Provenance,
}

impl EekHypothesis {
    pub fn key(&self) -> &BitString {
        self.concept.key()
    }
}

impl Hypothesis for EekHypothesis {
    type Input = [BigUint];
    type Label = EekLabel;

    fn predict(&self, input: &[BigUint]) -> Result<EekLabel, LearnError> {
        Ok(eval_eek(&self.concept, input)?)
    }

    fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

#[derive(Debug, Clone)]
pub struct BeekHypothesis {
    concept: EekConcept,
    embedding: Embedding,
    provenance: Provenance,
}

impl BeekHypothesis {
    pub fn key(&self) -> &BitString {
        self.concept.key()
    }
}

impl Hypothesis for BeekHypothesis {
    type Input = [BitString];
    type Label = EekLabel;

    fn predict(&self, input: &[BitString]) -> Result<EekLabel, LearnError> {
        Ok(eval_beek(&self.concept, &self.embedding, input)?)
    }

    fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Recovers the key from the first consistent example; later examples are
/// only cross-checked.
fn learn_key<'a>(
    group: &GroupDescription,
    examples: impl Iterator<Item = (usize, bool, &'a EekLabel, &'a [BigUint])>,
) -> Result<(BitString, usize, CrossCheck), LearnError> {
    let mut key: Option<(BitString, usize)> = None;
    let mut check = CrossCheck::default();
    for (index, usable, label, features) in examples {
        if !usable {
            check.skipped += 1;
            continue;
        }
        match (recover_key(group, label, features), &key) {
            (Ok(y), None) => key = Some((y, index)),
            (Ok(y), Some((k, _))) if &y == k => check.agreeing += 1,
            (Ok(_), Some(_)) => check.disagreeing += 1,
            (Err(LearnError::InconsistentSample { .. }), _) => check.skipped += 1,
            (Err(e), _) => return Err(e),
        }
    }
    key.map(|(k, i)| (k, i, check)).ok_or_else(|| LearnError::LearningFailure("no consistent training example".into()))
}

pub fn luqpi_learn_eek(train: &[EekExample], group: &GroupDescription) -> Result<EekHypothesis, LearnError> {
    let n = group.n as usize;
    let (key, used, cross_check) = learn_key(
        group,
        train.iter().enumerate().map(|(i, e)| (i, e.features.len() == n, &e.label, e.features.as_slice())),
    )?;
    let concept = EekConcept::new(group.clone(), key)?;
    let provenance = Provenance { learner: "luqpi-eek".into(), train_size: train.len(), used_example: used, cross_check };
    Ok(EekHypothesis { concept, provenance })
}

/// As [`luqpi_learn_eek`], skipping examples with an input that embeds to the
/// identity: their label is the sentinel and carries no key information.
pub fn luqpi_learn_beek(train: &[BeekExample], embedding: &Embedding) -> Result<BeekHypothesis, LearnError> {
    let group = embedding.group();
    let n = group.n as usize;
    let degenerate = |e: &BeekExample| -> Result<bool, LearnError> {
        for z in &e.input {
            if embedding.embed(z)?.is_one() {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let flags = train.iter().map(|e| Ok(e.input.len() == n && !degenerate(e)?)).collect::<Result<Vec<bool>, LearnError>>()?;
    let (key, used, cross_check) = learn_key(
        group,
        train.iter().zip(&flags).enumerate().map(|(i, (e, &ok))| (i, ok, &e.label, e.features.as_slice())),
    )
    .map_err(|e| match e {
        LearnError::LearningFailure(_) => LearnError::LearningFailure("every training example is degenerate or inconsistent".into()),
        other => other,
    })?;
    let concept = EekConcept::new(group.clone(), key)?;
    let provenance = Provenance { learner: "luqpi-beek".into(), train_size: train.len(), used_example: used, cross_check };
    Ok(BeekHypothesis { concept, embedding: embedding.clone(), provenance })
}

/// Per-bit majority over every consistent example.
pub fn majority_key(group: &GroupDescription, train: &[EekExample]) -> Result<BitString, LearnError> {
    let n = group.n as usize;
    let mut votes = vec![0i64; n];
    let mut used = 0usize;
    for e in train {
        if let Ok(y) = recover_key(group, &e.label, &e.features) {
            if y.len() != n {
                continue;
            }
            used += 1;
            for (v, &b) in votes.iter_mut().zip(y.bits()) {
                *v += if b { 1 } else { -1 };
            }
        }
    }
    if used == 0 {
        return Err(LearnError::LearningFailure("no consistent training example".into()));
    }
    Ok(BitString::new(votes.into_iter().map(|v| v > 0).collect()))
}

pub fn draw_eek_examples<E, R>(concept: &EekConcept, extractor: &E, m: usize, rng: &mut R) -> Result<Vec<EekExample>, LearnError>
where
    E: FeatureExtractor<Input = [BigUint], Features = Vec<BigUint>>,
    R: Rng + ?Sized,
{
    (0..m)
        .map(|_| {
            let input = random_inputs(concept.group(), rng);
            let features = extractor.extract(&input)?;
            let label = eval_eek(concept, &input)?;
            Ok(ExtendedExample { input, features, label })
        })
        .collect()
}

pub fn random_beek_inputs<R: Rng + ?Sized>(embedding: &Embedding, rng: &mut R) -> Vec<BitString> {
    (0..embedding.group().n).map(|_| BitString::random(embedding.input_bits(), rng)).collect()
}

pub fn draw_beek_example<E, R>(concept: &EekConcept, embedding: &Embedding, extractor: &E, rng: &mut R) -> Result<BeekExample, LearnError>
where
    E: FeatureExtractor<Input = [BitString], Features = Vec<BigUint>>,
    R: Rng + ?Sized,
{
    let input = random_beek_inputs(embedding, rng);
    let features = extractor.extract(&input)?;
    let label = eval_beek(concept, embedding, &input)?;
    Ok(ExtendedExample { input, features, label })
}

/// Fraction of `m` oracle draws `(x, c(x))` with `h(x) != c(x)`. A prediction
/// error counts as a miss.
///
/// # Panics
/// If `m == 0` or the oracle runs dry.
pub fn evaluate_hypothesis<H, I, L>(h: &H, oracle: impl IntoIterator<Item = (I, L)>, m: usize) -> f64
where
    H: Hypothesis<Label = L> + ?Sized,
    I: std::borrow::Borrow<H::Input>,
    L: PartialEq,
{
    assert!(m >= 1, "evaluation needs at least one sample");
    let mut wrong = 0usize;
    let mut seen = 0usize;
    for (x, y) in oracle.into_iter().take(m) {
        seen += 1;
        match h.predict(x.borrow()) {
            Ok(p) if p == y => {}
            _ => wrong += 1,
        }
    }
    assert_eq!(seen, m, "oracle produced fewer than m samples");
    wrong as f64 / m as f64
}

/// All `q^n` input tuples, for exhaustive checks on tiny groups.
pub fn all_eek_inputs(group: &GroupDescription) -> Vec<Vec<BigUint>> {
    let elements = group.elements();
    let n = group.n as usize;
    let total = elements.len().pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut tuple = Vec::with_capacity(n);
            for _ in 0..n {
                tuple.push(elements[idx % elements.len()].clone());
                idx /= elements.len();
            }
            tuple
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Eek,
    Beek,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: u32,
    pub train_size: usize,
    pub test_error: f64,
    pub key_recovered: bool,
}

/// Cap on BEEK draws while waiting for a non-degenerate example.
pub const BEEK_MAX_DRAWS: usize = 64;

/// Groups up to this security size are tested exhaustively.
pub const EXHAUSTIVE_MAX_N: u32 = 4;

pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// One learning trial: a fresh concept, training draws, then `test_size`
/// bare inputs (or every input tuple for EEK at `n <= 4`).
pub fn run_trial(task: Task, group: &GroupDescription, seed: u64, trial: usize, test_size: usize) -> Result<TrialRecord, LearnError> {
    let mut rng = trial_rng(seed, trial);
    let concept = EekConcept::random(group.clone(), &mut rng);
    let n = group.n;
    match task {
        Task::Eek => {
            let extractor = EekFeatureExtractor::new(group.clone());
            let train = draw_eek_examples(&concept, &extractor, 1, &mut rng)?;
            let h = luqpi_learn_eek(&train, group)?;
            let test_error = if n <= EXHAUSTIVE_MAX_N {
                let inputs = all_eek_inputs(group);
                let m = inputs.len();
                let oracle = inputs.into_iter().map(|x| {
                    let y = eval_eek(&concept, &x).expect("subgroup inputs");
                    (x, y)
                });
                evaluate_hypothesis(&h, oracle, m)
            } else {
                let oracle = std::iter::repeat_with(|| {
                    let x = random_inputs(group, &mut rng);
                    let y = eval_eek(&concept, &x).expect("subgroup inputs");
                    (x, y)
                });
                evaluate_hypothesis(&h, oracle, test_size)
            };
            Ok(TrialRecord { trial, n, train_size: train.len(), test_error, key_recovered: h.key() == concept.key() })
        }
        Task::Beek => {
            let embedding = Embedding::new(group.clone());
            let extractor = BeekFeatureExtractor::new(embedding.clone());
            let mut train = Vec::new();
            for _ in 0..BEEK_MAX_DRAWS {
                let e = draw_beek_example(&concept, &embedding, &extractor, &mut rng)?;
                let degenerate = e.input.iter().any(|z| embedding.embed(z).map(|h| h.is_one()).unwrap_or(true));
                train.push(e);
                if !degenerate {
                    break;
                }
            }
            let h = luqpi_learn_beek(&train, &embedding)?;
            let oracle = std::iter::repeat_with(|| {
                let x = random_beek_inputs(&embedding, &mut rng);
                let y = eval_beek(&concept, &embedding, &x).expect("well-formed inputs");
                (x, y)
            });
            let test_error = evaluate_hypothesis(&h, oracle, test_size);
            Ok(TrialRecord { trial, n, train_size: train.len(), test_error, key_recovered: h.key() == concept.key() })
        }
    }
}

/// Runs `trials` independent trials; output order follows the trial index.
pub fn run_trials(task: Task, n: u32, trials: usize, seed: u64, test_size: usize) -> Result<Vec<TrialRecord>, LearnError> {
    let group = crate::modmath::group_gen(n)?;
    (0..trials).into_par_iter().map(|t| run_trial(task, &group, seed, t, test_size)).collect()
}

/// Monte-Carlo frequency of the BEEK sentinel on uniform inputs.
pub fn sentinel_frequency<R: Rng + ?Sized>(embedding: &Embedding, draws: usize, rng: &mut R) -> Result<f64, LearnError> {
    let mut hits = 0usize;
    for _ in 0..draws {
        let inputs = random_beek_inputs(embedding, rng);
        let mut any = false;
        for z in &inputs {
            if embedding.embed(z)?.is_one() {
                any = true;
                break;
            }
        }
        hits += any as usize;
    }
    Ok(hits as f64 / draws as f64)
}

/// Bound `n / (n ln n)` on the sentinel probability of `n` independent embeddings.
pub fn sentinel_bound(n: u32) -> f64 {
    let n = n as f64;
    n * (1.0 / (n * n.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modmath::group_gen;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn extract_examples() {
        let grp = group_gen(2).unwrap();
        assert_eq!(extract_features_eek(&grp, &[big(2), big(4)]).unwrap(), vec![big(1), big(2)]);
        assert_eq!(extract_features_eek(&grp, &[big(1), big(1)]).unwrap(), vec![big(0), big(0)]);
        let big_grp = group_gen(20).unwrap();
        let mut rng = trial_rng(1, 0);
        let h = random_inputs(&big_grp, &mut rng);
        let r = extract_features_eek(&big_grp, &h).unwrap();
        for (hi, ri) in h.iter().zip(&r) {
            assert_eq!(&big_grp.gen_pow(ri), hi);
        }
        assert!(extract_features_eek(&grp, &[big(3)]).is_err());
    }

    #[test]
    fn recover_key_examples() {
        let grp = group_gen(2).unwrap();
        let label = EekLabel { public: big(4), ciphertexts: vec![big(1), big(2)] };
        assert_eq!(recover_key(&grp, &label, &[big(1), big(2)]).unwrap().to_string(), "10");
        let zero = EekLabel::sentinel(2);
        assert_eq!(recover_key(&grp, &zero, &[big(1), big(2)]).unwrap().to_string(), "00");
        let bad = EekLabel { public: big(4), ciphertexts: vec![big(2), big(2)] };
        assert_eq!(recover_key(&grp, &bad, &[big(1), big(2)]), Err(LearnError::InconsistentSample { index: 0 }));
    }

    #[test]
    fn recover_key_round_trip() {
        let grp = group_gen(9).unwrap();
        let mut rng = trial_rng(2, 0);
        for _ in 0..100 {
            let c = EekConcept::random(grp.clone(), &mut rng);
            let h = random_inputs(&grp, &mut rng);
            let label = eval_eek(&c, &h).unwrap();
            let r = extract_features_eek(&grp, &h).unwrap();
            assert_eq!(&recover_key(&grp, &label, &r).unwrap(), c.key());
        }
    }

    #[test]
    fn learned_hypothesis_needs_no_extractor_at_deployment() {
        let grp = group_gen(8).unwrap();
        let mut rng = trial_rng(3, 0);
        let c = EekConcept::random(grp.clone(), &mut rng);
        let extractor = CountingExtractor::new(EekFeatureExtractor::new(grp.clone()));
        let train = draw_eek_examples(&c, &extractor, 3, &mut rng).unwrap();
        assert_eq!(extractor.calls(), 3);
        let h = luqpi_learn_eek(&train, &grp).unwrap();
        assert_eq!(h.provenance().cross_check, CrossCheck { agreeing: 2, disagreeing: 0, skipped: 0 });
        let oracle: Vec<_> = (0..1000)
            .map(|_| {
                let x = random_inputs(&grp, &mut rng);
                let y = eval_eek(&c, &x).unwrap();
                (x, y)
            })
            .collect();
        assert_eq!(evaluate_hypothesis(&h, oracle, 1000), 0.0);
        assert_eq!(extractor.calls(), 3);
        assert_eq!(majority_key(&grp, &train).unwrap(), *h.key());
    }

    #[test]
    fn corrupted_examples_are_skipped_or_fail() {
        let grp = group_gen(2).unwrap();
        let bad = ExtendedExample {
            input: vec![big(2), big(4)],
            features: vec![big(1), big(2)],
            label: EekLabel { public: big(4), ciphertexts: vec![big(2), big(2)] },
        };
        assert!(matches!(luqpi_learn_eek(std::slice::from_ref(&bad), &grp), Err(LearnError::LearningFailure(_))));
        assert!(matches!(luqpi_learn_eek(&[], &grp), Err(LearnError::LearningFailure(_))));
        let good = ExtendedExample { label: EekLabel { public: big(4), ciphertexts: vec![big(1), big(2)] }, ..bad.clone() };
        let h = luqpi_learn_eek(&[bad, good], &grp).unwrap();
        assert_eq!(h.key().to_string(), "10");
        assert_eq!(h.provenance().used_example, 1);
        assert_eq!(h.provenance().cross_check.skipped, 1);
    }

    struct Constant(bool, Provenance);

    impl Hypothesis for Constant {
        type Input = u32;
        type Label = bool;

        fn predict(&self, _: &u32) -> Result<bool, LearnError> {
            Ok(self.0)
        }

        fn provenance(&self) -> &Provenance {
            &self.1
        }
    }

    #[test]
    fn evaluate_binary_task() {
        let prov = Provenance { learner: "const".into(), train_size: 0, used_example: 0, cross_check: CrossCheck::default() };
        let h = Constant(true, prov);
        let mut rng = trial_rng(4, 0);
        let m = 20_000;
        let oracle = std::iter::repeat_with(|| {
            let y: bool = rng.gen();
            (0u32, y)
        });
        let err = evaluate_hypothesis(&h, oracle, m);
        let sigma = (0.25 / m as f64).sqrt();
        assert!((err - 0.5).abs() < 4.0 * sigma, "err = {err}");
        assert_eq!(evaluate_hypothesis(&h, [(0u32, true)], 1), 0.0);
        assert_eq!(evaluate_hypothesis(&h, [(0u32, false)], 1), 1.0);
    }

    #[test]
    fn beek_learning_and_degradation() {
        for n in [4u32, 6, 8] {
            let grp = group_gen(n).unwrap();
            for t in 0..5 {
                let rec = run_trial(Task::Beek, &grp, 9, t, 2000).unwrap();
                assert!(rec.key_recovered);
                assert_eq!(rec.test_error, 0.0);
            }
        }
    }

    #[test]
    fn beek_learns_from_reduced_samples() {
        let grp = group_gen(6).unwrap();
        let mut rng = trial_rng(5, 0);
        let c = EekConcept::random(grp.clone(), &mut rng);
        let emb = Embedding::new(grp.clone());
        let eek = draw_eek_examples(&c, &EekFeatureExtractor::new(grp.clone()), 20, &mut rng).unwrap();
        let samples: Vec<_> = eek.iter().map(|e| crate::eek::EekSample { inputs: e.input.clone(), label: e.label.clone() }).collect();
        let beek = crate::eek::beek_from_eek_samples(&emb, &samples, &mut rng).unwrap();
        let extractor = BeekFeatureExtractor::new(emb.clone());
        let train: Vec<BeekExample> = beek
            .into_iter()
            .map(|b| {
                let features = extractor.extract(&b.inputs).unwrap();
                ExtendedExample { input: b.inputs, features, label: b.label }
            })
            .collect();
        let h = luqpi_learn_beek(&train, &emb).unwrap();
        assert_eq!(h.key(), c.key());
    }

    #[test]
    fn eek_trials_are_exact() {
        for n in [2u32, 3, 5, 10] {
            let recs = run_trials(Task::Eek, n, 10, 7, 200).unwrap();
            assert!(recs.iter().all(|r| r.key_recovered && r.test_error == 0.0 && r.train_size == 1));
        }
    }

    #[test]
    fn exhaustive_inputs_cover_the_group() {
        let grp = group_gen(3).unwrap();
        let all = all_eek_inputs(&grp);
        assert_eq!(all.len(), 125);
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), 125);
    }
}
