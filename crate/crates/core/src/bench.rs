//! Phase-classification benchmark over a generated Rydberg dataset:
//! boundary-weighted sampling, stratified cross-validation over coarse grids,
//! repeated SVM / SVM+ trials and the report files.
//!
//! Inputs are `(Δ/Ω, R0/a)`; the privileged vector is `(O_Z2, O_Z3)`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::rydberg::{Phase, PhaseSample, ORDER_THRESHOLD};
use crate::svm::{svm_fit_with, KernelKind, KernelSpec, OneVsAll, SolverOptions, Standardizer, SvmError, SvmModel};
use crate::svmplus::{svmplus_fit_with, SvmPlusModel};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("class {class} has {available} points but {needed} were requested")]
    InsufficientClass { class: Phase, needed: usize, available: usize },
    #[error("stratification failed: {0}")]
    Stratification(String),
    #[error("no {method} configuration converged on every fold ({failed} tried)")]
    NoValidConfiguration { method: Method, failed: usize },
    #[error("{strategy}, size {size}, repeat {repeat}: {source}")]
    Trial { strategy: StrategyKind, size: usize, repeat: usize, source: Box<BenchError> },
    #[error("{context}: {source}")]
    Selection { context: String, source: Box<BenchError> },
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svm,
    Svmplus,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Svm => "svm",
            Method::Svmplus => "svmplus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Uniform,
    LightBoundary,
    HardBoundary,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Uniform, StrategyKind::LightBoundary, StrategyKind::HardBoundary];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Uniform => "uniform",
            StrategyKind::LightBoundary => "light_boundary",
            StrategyKind::HardBoundary => "hard_boundary",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Disordered : Z2 : Z3.
pub const DEFAULT_CLASS_RATIO: [f64; 3] = [0.56, 0.27, 0.17];
pub const LIGHT_BOUNDARY_WEIGHT: f64 = 2.0;
pub const HARD_BOUNDARY_WEIGHT: f64 = 6.0;
/// Half-width of the triangular proximity kernel around the 0.8 threshold.
pub const PROXIMITY_HALF_WIDTH: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingStrategy {
    pub kind: StrategyKind,
    pub boundary_weight: f64,
    pub class_ratio: [f64; 3],
}

impl SamplingStrategy {
    pub fn preset(kind: StrategyKind) -> Self {
        let boundary_weight = match kind {
            StrategyKind::Uniform => 0.0,
            StrategyKind::LightBoundary => LIGHT_BOUNDARY_WEIGHT,
            StrategyKind::HardBoundary => HARD_BOUNDARY_WEIGHT,
        };
        SamplingStrategy { kind, boundary_weight, class_ratio: DEFAULT_CLASS_RATIO }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.boundary_weight >= 0.0 && self.boundary_weight.is_finite()) {
            return Err(BenchError::InvalidArgument(format!("boundary weight {} must be >= 0", self.boundary_weight)));
        }
        if self.class_ratio.iter().any(|r| r.is_nan() || *r < 0.0) || (self.class_ratio.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(BenchError::InvalidArgument(format!("class ratio {:?} must be non-negative and sum to 1", self.class_ratio)));
        }
        Ok(())
    }
}

/// `1 - |max(O_Z2, O_Z3) - 0.8| / 0.2`, clipped at zero.
pub fn boundary_proximity(sample: &PhaseSample) -> f64 {
    let m = sample.o_z2.max(sample.o_z3);
    (1.0 - (m - ORDER_THRESHOLD).abs() / PROXIMITY_HALF_WIDTH).max(0.0)
}

/// Floors of `size * ratio`, remainder to the class with the largest ratio.
pub fn class_counts(ratio: &[f64; 3], size: usize) -> [usize; 3] {
    let mut counts = ratio.map(|r| (r * size as f64 + 1e-9).floor() as usize);
    let assigned: usize = counts.iter().sum();
    let largest = (0..3).fold(0, |best, c| if ratio[c] > ratio[best] { c } else { best });
    counts[largest] += size.saturating_sub(assigned);
    counts
}

/// Indices (ascending) of a training set of `size` points drawn without
/// replacement, class by class, with weights `exp(w * proximity)`.
pub fn sample_training_set(
    dataset: &[PhaseSample],
    strategy: &SamplingStrategy,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, BenchError> {
    strategy.validate()?;
    if size > dataset.len() {
        return Err(BenchError::InvalidArgument(format!("{size} points requested from a dataset of {}", dataset.len())));
    }
    let counts = class_counts(&strategy.class_ratio, size);
    let mut out = Vec::with_capacity(size);
    for phase in Phase::ALL {
        let members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset[i].label == phase).collect();
        let needed = counts[phase.index()];
        if needed > members.len() {
            return Err(BenchError::InsufficientClass { class: phase, needed, available: members.len() });
        }
        if needed == 0 {
            continue;
        }
        let weights: Vec<f64> =
            members.iter().map(|&i| (strategy.boundary_weight * boundary_proximity(&dataset[i])).exp()).collect();
        let picked = rand::seq::index::sample_weighted(rng, members.len(), |k| weights[k], needed)
            .map_err(|e| BenchError::InvalidArgument(format!("weighted sampling: {e}")))?;
        out.extend(picked.iter().map(|k| members[k]));
    }
    out.sort_unstable();
    Ok(out)
}

pub fn inputs(sample: &PhaseSample) -> Vec<f64> {
    vec![sample.delta_over_omega, sample.r0_over_a]
}

/// Access to the order parameters, counting every read.
pub struct PrivilegedView<'a> {
    samples: &'a [PhaseSample],
    reads: AtomicUsize,
}

impl<'a> PrivilegedView<'a> {
    pub fn new(samples: &'a [PhaseSample]) -> Self {
        PrivilegedView { samples, reads: AtomicUsize::new(0) }
    }

    pub fn get(&self, index: usize) -> Vec<f64> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        let s = &self.samples[index];
        vec![s.o_z2, s.o_z3]
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Vec<Vec<f64>>,
    pub x_star: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    pub fn gather(dataset: &[PhaseSample], privileged: &PrivilegedView<'_>, indices: &[usize]) -> Self {
        TrainingSet {
            x: indices.iter().map(|&i| inputs(&dataset[i])).collect(),
            x_star: indices.iter().map(|&i| privileged.get(i)).collect(),
            labels: indices.iter().map(|&i| dataset[i].label.index()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> TrainingSet {
        TrainingSet {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            x_star: idx.iter().map(|&i| self.x_star[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// One grid point. `c_star`/`gamma_star` are set for SVM+ only; the
/// privileged kernel is always RBF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_star: Option<f64>,
}

impl Hyper {
    fn order_key(&self) -> [f64; 5] {
        [
            self.c,
            self.gamma,
            self.c_star.unwrap_or(0.0),
            self.gamma_star.unwrap_or(0.0),
            self.kernel as usize as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmGrid {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kernels: Vec<KernelKind>,
}

impl Default for SvmGrid {
    fn default() -> Self {
        SvmGrid {
            c: vec![1.0, 10.0, 50.0, 100.0, 250.0, 500.0, 1000.0, 2500.0],
            gamma: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            kernels: vec![KernelKind::Rbf, KernelKind::Polynomial],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivilegedGrid {
    pub c_star: Vec<f64>,
    pub gamma_star: Vec<f64>,
}

impl Default for PrivilegedGrid {
    fn default() -> Self {
        PrivilegedGrid {
            c_star: vec![1.0, 10.0, 100.0, 1e3, 1e4, 1e5],
            gamma_star: vec![1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0],
        }
    }
}

/// Every configuration, sorted so that the first minimum wins ties:
/// smaller C, then gamma, then C*, then gamma*, then RBF before polynomial.
pub fn configurations(method: Method, svm: &SvmGrid, privileged: &PrivilegedGrid) -> Vec<Hyper> {
    let mut out = Vec::new();
    for &kernel in &svm.kernels {
        for &c in &svm.c {
            for &gamma in &svm.gamma {
                match method {
                    Method::Svm => out.push(Hyper { kernel, c, gamma, c_star: None, gamma_star: None }),
                    Method::Svmplus => {
                        for &cs in &privileged.c_star {
                            for &gs in &privileged.gamma_star {
                                out.push(Hyper { kernel, c, gamma, c_star: Some(cs), gamma_star: Some(gs) });
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.order_key().iter().zip(b.order_key().iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Classification needs far less than the solvers' default accuracy; capped
/// runs drop ill-conditioned grid points quickly instead of grinding on them.
pub const BENCH_TOLERANCE: f64 = 1e-3;
pub const BENCH_MAX_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub poly_degree: u32,
    pub poly_coef0: f64,
    pub standardize: bool,
    pub solver: SolverOptions,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            poly_degree: crate::svm::DEFAULT_POLY_DEGREE,
            poly_coef0: crate::svm::DEFAULT_POLY_COEF0,
            standardize: true,
            solver: SolverOptions { tolerance: BENCH_TOLERANCE, max_iterations: BENCH_MAX_ITERATIONS },
        }
    }
}

impl FitSettings {
    fn kernel(&self, hyper: &Hyper) -> KernelSpec {
        match hyper.kernel {
            KernelKind::Rbf => KernelSpec::rbf(hyper.gamma),
            KernelKind::Polynomial => KernelSpec::polynomial(hyper.gamma, self.poly_degree, self.poly_coef0),
            KernelKind::Linear => KernelSpec::linear(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Heads {
    Svm(OneVsAll<SvmModel>),
    SvmPlus(OneVsAll<SvmPlusModel>),
}

/// Deployment-time classifier: input scaling plus one-vs-all heads. SVM+
/// heads are stripped of their correcting functions.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub scaler: Standardizer,
    pub heads: Heads,
}

impl Classifier {
    pub fn predict(&self, x: &[f64]) -> Result<usize, SvmError> {
        let z = self.scaler.transform(x);
        match &self.heads {
            Heads::Svm(h) => h.predict(&z),
            Heads::SvmPlus(h) => h.predict(&z),
        }
    }
}

pub fn fit_classifier(method: Method, hyper: &Hyper, train: &TrainingSet, settings: &FitSettings) -> Result<Classifier, SvmError> {
    let scaler = if settings.standardize {
        Standardizer::fit(&train.x)?
    } else {
        Standardizer::identity(train.x.first().map_or(0, Vec::len))
    };
    let xs = scaler.transform_all(&train.x);
    let kernel = settings.kernel(hyper);
    let heads = match method {
        Method::Svm => Heads::Svm(OneVsAll::fit(&train.labels, |ys| {
            svm_fit_with(&xs, ys, kernel, hyper.c, settings.solver, None)
        })?),
        Method::Svmplus => {
            let c_star = hyper.c_star.ok_or_else(|| SvmError::InvalidArgument("SVM+ needs C*".into()))?;
            let gamma_star = hyper.gamma_star.ok_or_else(|| SvmError::InvalidArgument("SVM+ needs gamma*".into()))?;
            let mut heads = OneVsAll::fit(&train.labels, |ys| {
                svmplus_fit_with(&xs, &train.x_star, ys, kernel, KernelSpec::rbf(gamma_star), hyper.c, c_star, settings.solver, None)
            })?;
            heads.heads.iter_mut().for_each(SvmPlusModel::strip_privileged);
            Heads::SvmPlus(heads)
        }
    };
    Ok(Classifier { scaler, heads })
}

/// Fraction of correct predictions; reads inputs and labels only.
pub fn accuracy(classifier: &Classifier, x: &[Vec<f64>], labels: &[usize]) -> Result<f64, SvmError> {
    if x.is_empty() {
        return Err(SvmError::InvalidArgument("empty evaluation set".into()));
    }
    let mut hits = 0usize;
    for (xi, &l) in x.iter().zip(labels) {
        if classifier.predict(xi)? == l {
            hits += 1;
        }
    }
    Ok(hits as f64 / x.len() as f64)
}

/// Fold id per point: each class is shuffled and dealt round-robin,
/// continuing the deal across classes so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[usize], folds: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, BenchError> {
    if folds < 2 {
        return Err(BenchError::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if folds > labels.len() {
        return Err(BenchError::Stratification(format!("{folds} folds for {} points", labels.len())));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut assignment = vec![0; labels.len()];
    let mut next = 0usize;
    for &c in &classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    for f in 0..folds {
        let mut train_classes: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != f).map(|i| labels[i]).collect();
        train_classes.sort_unstable();
        train_classes.dedup();
        if train_classes.len() < 2 {
            return Err(BenchError::Stratification(format!("training part of fold {f} holds a single class")));
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub chosen: Hyper,
    pub validation_error: f64,
    pub evaluated: usize,
    /// Configurations dropped because a fold did not converge.
    pub failed: usize,
}

/// Mean validation error over stratified folds for each configuration; the
/// first minimum in `grid` order wins. A configuration whose solver fails to
/// converge on any fold is dropped.
pub fn cv_select(
    train: &TrainingSet,
    method: Method,
    grid: &[Hyper],
    folds: usize,
    settings: &FitSettings,
    rng: &mut ChaCha8Rng,
) -> Result<CvOutcome, BenchError> {
    if grid.is_empty() {
        return Err(BenchError::InvalidArgument("empty hyperparameter grid".into()));
    }
    let assignment = stratified_folds(&train.labels, folds, rng)?;
    let splits: Vec<(TrainingSet, TrainingSet)> = (0..folds)
        .map(|f| {
            let (fit_idx, val_idx): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&i| assignment[i] != f);
            (train.subset(&fit_idx), train.subset(&val_idx))
        })
        .collect();
    let scores: Vec<Option<f64>> = grid
        .par_iter()
        .map(|hyper| {
            let mut total = 0.0;
            for (fit, val) in &splits {
                match fit_classifier(method, hyper, fit, settings) {
                    Ok(model) => total += 1.0 - accuracy(&model, &val.x, &val.labels)?,
                    Err(SvmError::NoConvergence { .. }) => return Ok(None),
                    Err(e) => return Err(BenchError::from(e)),
                }
            }
            Ok(Some(total / folds as f64))
        })
        .collect::<Result<_, BenchError>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(e) = *s {
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((i, e));
            }
        }
    }
    let failed = scores.iter().filter(|s| s.is_none()).count();
    let (i, validation_error) = best.ok_or(BenchError::NoValidConfiguration { method, failed })?;
    Ok(CvOutcome { chosen: grid[i], validation_error, evaluated: grid.len(), failed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_sizes: Vec<usize>,
    pub repeats: usize,
    pub cv_folds: usize,
    /// Training size at which hyperparameters are selected once per strategy.
    pub anchor_size: usize,
    pub strategies: Vec<StrategyKind>,
    pub light_weight: f64,
    pub hard_weight: f64,
    /// Disordered : Z2 : Z3.
    pub class_ratio: [f64; 3],
    pub svm: SvmGrid,
    pub svmplus: PrivilegedGrid,
    pub poly_degree: u32,
    pub poly_coef0: f64,
    /// Scale inputs with the training mean and deviation.
    pub standardize: bool,
    /// Evaluate on the points not used for training instead of the whole dataset.
    pub disjoint_evaluation: bool,
    pub tolerance: f64,
    /// Iteration cap per fit during cross-validation.
    pub max_iterations: usize,
    /// Iteration cap for the fits that produce result rows.
    pub final_max_iterations: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_sizes: vec![15, 20, 30, 40, 60, 80, 100],
            repeats: 30,
            cv_folds: 5,
            anchor_size: 40,
            strategies: StrategyKind::ALL.to_vec(),
            light_weight: LIGHT_BOUNDARY_WEIGHT,
            hard_weight: HARD_BOUNDARY_WEIGHT,
            class_ratio: DEFAULT_CLASS_RATIO,
            svm: SvmGrid::default(),
            svmplus: PrivilegedGrid::default(),
            poly_degree: crate::svm::DEFAULT_POLY_DEGREE,
            poly_coef0: crate::svm::DEFAULT_POLY_COEF0,
            standardize: true,
            disjoint_evaluation: false,
            tolerance: BENCH_TOLERANCE,
            max_iterations: BENCH_MAX_ITERATIONS,
            final_max_iterations: SolverOptions::default().max_iterations,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2".into());
        }
        if self.train_sizes.is_empty() || self.train_sizes.contains(&0) {
            return bad("train_sizes must be non-empty and positive".into());
        }
        if self.strategies.is_empty() {
            return bad("no sampling strategies".into());
        }
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.svm.c) || !positive(&self.svm.gamma) || self.svm.kernels.is_empty() {
            return bad("svm grid needs positive C and gamma values and a kernel".into());
        }
        if !positive(&self.svmplus.c_star) || !positive(&self.svmplus.gamma_star) {
            return bad("svmplus grid needs positive C* and gamma* values".into());
        }
        for k in StrategyKind::ALL {
            self.strategy(k).validate()?;
        }
        Ok(())
    }

    pub fn strategy(&self, kind: StrategyKind) -> SamplingStrategy {
        let boundary_weight = match kind {
            StrategyKind::Uniform => 0.0,
            StrategyKind::LightBoundary => self.light_weight,
            StrategyKind::HardBoundary => self.hard_weight,
        };
        SamplingStrategy { kind, boundary_weight, class_ratio: self.class_ratio }
    }

    pub fn settings(&self) -> FitSettings {
        FitSettings {
            poly_degree: self.poly_degree,
            poly_coef0: self.poly_coef0,
            standardize: self.standardize,
            solver: SolverOptions { tolerance: self.tolerance, max_iterations: self.max_iterations },
        }
    }

    pub fn final_settings(&self) -> FitSettings {
        let mut s = self.settings();
        s.solver.max_iterations = self.final_max_iterations;
        s
    }

    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Independent ChaCha stream per purpose and index.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose << 48 | index);
    rng
}

const STREAM_ANCHOR: u64 = 1;
const STREAM_CV_SVM: u64 = 2;
const STREAM_CV_SVMPLUS: u64 = 3;
const STREAM_TRIAL: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub strategy: StrategyKind,
    pub method: Method,
    pub outcome: CvOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub strategy: StrategyKind,
    pub train_size: usize,
    pub repeat: usize,
    pub accuracy: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    #[serde(rename = "Cstar")]
    pub c_star: Option<f64>,
    #[serde(rename = "gammastar")]
    pub gamma_star: Option<f64>,
    pub kernel: KernelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub std: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Mean with a two-sided 95% Student-t interval over `n - 1` degrees of freedom.
pub fn mean_ci(values: &[f64]) -> Interval {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Interval { n, mean, std: None, ci_low: None, ci_high: None };
    }
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let half = t_quantile_975(n - 1) * std / (n as f64).sqrt();
    Interval { n, mean, std: Some(std), ci_low: Some(mean - half), ci_high: Some(mean + half) }
}

pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1").inverse_cdf(0.975)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub method: Method,
    pub strategy: StrategyKind,
    pub train_size: usize,
    pub accuracy: Interval,
}

/// Paired per-repeat difference `svmplus - svm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceCell {
    pub strategy: StrategyKind,
    pub train_size: usize,
    pub difference: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Firewall {
    pub training_reads: usize,
    /// Privileged reads made while predicting evaluation points.
    pub evaluation_reads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub dataset_size: usize,
    pub selections: Vec<Selection>,
    pub rows: Vec<ResultRow>,
    pub cells: Vec<SummaryCell>,
    pub differences: Vec<DifferenceCell>,
    pub firewall: Firewall,
}

fn row(method: Method, strategy: StrategyKind, train_size: usize, repeat: usize, accuracy: f64, h: &Hyper) -> ResultRow {
    ResultRow {
        method,
        strategy,
        train_size,
        repeat,
        accuracy,
        c: h.c,
        gamma: h.gamma,
        c_star: h.c_star,
        gamma_star: h.gamma_star,
        kernel: h.kernel,
    }
}

pub fn run_experiment(config: &ExperimentConfig, dataset: &[PhaseSample]) -> Result<ExperimentOutput, BenchError> {
    config.validate()?;
    for phase in Phase::ALL {
        if config.class_ratio[phase.index()] > 0.0 && !dataset.iter().any(|s| s.label == phase) {
            return Err(BenchError::InsufficientClass { class: phase, needed: 1, available: 0 });
        }
    }
    let settings = config.settings();
    let final_settings = config.final_settings();
    let seed = config.seed;

    let mut selections = Vec::new();
    let mut chosen = Vec::new();
    for (si, &kind) in config.strategies.iter().enumerate() {
        let strategy = config.strategy(kind);
        let context = |m: Method| move |e: BenchError| BenchError::Selection {
            context: format!("{kind} {m} selection at size {}", config.anchor_size),
            source: Box::new(e),
        };
        let view = PrivilegedView::new(dataset);
        let idx = sample_training_set(dataset, &strategy, config.anchor_size, &mut stream(seed, STREAM_ANCHOR, si as u64))
            .map_err(context(Method::Svm))?;
        let anchor = TrainingSet::gather(dataset, &view, &idx);
        let mut pick = |method: Method, purpose: u64| -> Result<Hyper, BenchError> {
            let grid = configurations(method, &config.svm, &config.svmplus);
            let outcome = cv_select(&anchor, method, &grid, config.cv_folds, &settings, &mut stream(seed, purpose, si as u64))
                .map_err(context(method))?;
            let h = outcome.chosen;
            selections.push(Selection { strategy: kind, method, outcome });
            Ok(h)
        };
        let svm = pick(Method::Svm, STREAM_CV_SVM)?;
        let plus = pick(Method::Svmplus, STREAM_CV_SVMPLUS)?;
        chosen.push((svm, plus));
    }

    let mut tasks = Vec::new();
    for si in 0..config.strategies.len() {
        for &size in &config.train_sizes {
            for repeat in 0..config.repeats {
                tasks.push((si, size, repeat));
            }
        }
    }
    let eval_all: Vec<Vec<f64>> = dataset.iter().map(inputs).collect();
    let labels_all: Vec<usize> = dataset.iter().map(|s| s.label.index()).collect();
    let results: Vec<([ResultRow; 2], Firewall)> = tasks
        .par_iter()
        .enumerate()
        .map(|(t, &(si, size, repeat))| {
            let kind = config.strategies[si];
            let wrap = |e: BenchError| BenchError::Trial { strategy: kind, size, repeat, source: Box::new(e) };
            let (svm_h, plus_h) = chosen[si];
            let view = PrivilegedView::new(dataset);
            let idx = sample_training_set(dataset, &config.strategy(kind), size, &mut stream(seed, STREAM_TRIAL, t as u64))
                .map_err(wrap)?;
            let train = TrainingSet::gather(dataset, &view, &idx);
            let svm = fit_classifier(Method::Svm, &svm_h, &train, &final_settings).map_err(|e| wrap(e.into()))?;
            let plus = fit_classifier(Method::Svmplus, &plus_h, &train, &final_settings).map_err(|e| wrap(e.into()))?;
            let training_reads = view.reads();
            let (ex, el): (Vec<Vec<f64>>, Vec<usize>) = if config.disjoint_evaluation {
                (0..dataset.len())
                    .filter(|i| idx.binary_search(i).is_err())
                    .map(|i| (eval_all[i].clone(), labels_all[i]))
                    .unzip()
            } else {
                (eval_all.clone(), labels_all.clone())
            };
            let a_svm = accuracy(&svm, &ex, &el).map_err(|e| wrap(e.into()))?;
            let a_plus = accuracy(&plus, &ex, &el).map_err(|e| wrap(e.into()))?;
            let firewall = Firewall { training_reads, evaluation_reads: view.reads() - training_reads };
            Ok((
                [row(Method::Svm, kind, size, repeat, a_svm, &svm_h), row(Method::Svmplus, kind, size, repeat, a_plus, &plus_h)],
                firewall,
            ))
        })
        .collect::<Result<_, BenchError>>()?;

    let mut firewall = Firewall::default();
    let mut rows = Vec::with_capacity(2 * results.len());
    for (pair, fw) in results {
        firewall.training_reads += fw.training_reads;
        firewall.evaluation_reads += fw.evaluation_reads;
        rows.extend(pair);
    }
    let (cells, differences) = summarize(config, &rows);
    Ok(ExperimentOutput { config: config.clone(), dataset_size: dataset.len(), selections, rows, cells, differences, firewall })
}

pub fn summarize(config: &ExperimentConfig, rows: &[ResultRow]) -> (Vec<SummaryCell>, Vec<DifferenceCell>) {
    let mut cells = Vec::new();
    let mut differences = Vec::new();
    for &strategy in &config.strategies {
        for &train_size in &config.train_sizes {
            let of = |m: Method| -> Vec<&ResultRow> {
                rows.iter().filter(|r| r.method == m && r.strategy == strategy && r.train_size == train_size).collect()
            };
            let (svm, plus) = (of(Method::Svm), of(Method::Svmplus));
            for (method, rs) in [(Method::Svm, &svm), (Method::Svmplus, &plus)] {
                if !rs.is_empty() {
                    let acc: Vec<f64> = rs.iter().map(|r| r.accuracy).collect();
                    cells.push(SummaryCell { method, strategy, train_size, accuracy: mean_ci(&acc) });
                }
            }
            let diffs: Vec<f64> = plus
                .iter()
                .filter_map(|p| svm.iter().find(|s| s.repeat == p.repeat).map(|s| p.accuracy - s.accuracy))
                .collect();
            if !diffs.is_empty() {
                differences.push(DifferenceCell { strategy, train_size, difference: mean_ci(&diffs) });
            }
        }
    }
    (cells, differences)
}

#[derive(Debug, Clone, Serialize)]
struct PlotSeries {
    label: String,
    y: Vec<f64>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
struct PlotPanel {
    strategy: StrategyKind,
    x: Vec<usize>,
    series: Vec<PlotSeries>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `results.csv`, `summary.json` and one `plotdata/<strategy>.json` per panel.
pub fn emit_report(output: &ExperimentOutput, dir: &Path) -> Result<ReportPaths, BenchError> {
    if output.rows.is_empty() {
        return Err(BenchError::InvalidArgument("no result rows to report".into()));
    }
    let plot_dir = dir.join("plotdata");
    fs::create_dir_all(&plot_dir).map_err(io_err(&plot_dir))?;

    let csv_path = dir.join("results.csv");
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(&output.rows, std::io::BufWriter::new(file)).map_err(|e| BenchError::Io {
        path: csv_path.clone(),
        source: std::io::Error::other(e),
    })?;

    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "config": output.config,
        "dataset_size": output.dataset_size,
        "selections": output.selections,
        "cells": output.cells,
        "differences": output.differences,
        "firewall": output.firewall,
    }))
    .expect("summary serializes");
    fs::write(&summary_path, text + "\n").map_err(io_err(&summary_path))?;

    let mut plots = Vec::new();
    for &strategy in &output.config.strategies {
        let x: Vec<usize> = output.config.train_sizes.clone();
        let mut series = Vec::new();
        for method in [Method::Svm, Method::Svmplus] {
            let pick: Vec<&Interval> = x
                .iter()
                .filter_map(|&s| {
                    output.cells.iter().find(|c| c.method == method && c.strategy == strategy && c.train_size == s).map(|c| &c.accuracy)
                })
                .collect();
            series.push(PlotSeries {
                label: method.to_string(),
                y: pick.iter().map(|i| i.mean).collect(),
                lower: pick.iter().map(|i| i.ci_low).collect(),
                upper: pick.iter().map(|i| i.ci_high).collect(),
            });
        }
        let diff: Vec<&Interval> = x
            .iter()
            .filter_map(|&s| output.differences.iter().find(|d| d.strategy == strategy && d.train_size == s).map(|d| &d.difference))
            .collect();
        series.push(PlotSeries {
            label: "svmplus_minus_svm".into(),
            y: diff.iter().map(|i| i.mean).collect(),
            lower: diff.iter().map(|i| i.ci_low).collect(),
            upper: diff.iter().map(|i| i.ci_high).collect(),
        });
        let path = plot_dir.join(format!("{strategy}.json"));
        let text = serde_json::to_string_pretty(&PlotPanel { strategy, x, series }).expect("panel serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        plots.push(path);
    }
    Ok(ReportPaths { csv: csv_path, summary: summary_path, plots })
}
