//! Soft-margin SVM on the dual, solved by SMO with the maximal violating pair.

mod kernel;
mod multiclass;

pub use kernel::{kernel_eval, KernelKind, KernelSpec, DEFAULT_POLY_COEF0, DEFAULT_POLY_DEGREE};
pub use multiclass::{BinaryClassifier, OneVsAll};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("no convergence after {iterations} iterations, KKT residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the maximal KKT violation drops below this times
    /// `max(1, max_i Q_ii)`, the scale of the dual gradient.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-9, max_iterations: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub c: f64,
    /// One multiplier per training point, `0 <= alpha <= C`.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support: Vec<Vec<f64>>,
    /// `alpha_k y_k` for each support vector.
    pub support_coef: Vec<f64>,
    pub dim: usize,
    pub report: SolverReport,
}

/// Checks shape and labels shared by both SVM variants.
pub(crate) fn validate_training(xs: &[Vec<f64>], ys: &[f64]) -> Result<usize, SvmError> {
    if xs.len() != ys.len() {
        return Err(SvmError::InvalidArgument(format!("{} inputs but {} labels", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(SvmError::DegenerateData("need at least two points".into()));
    }
    let dim = xs[0].len();
    for x in xs {
        if x.len() != dim {
            return Err(SvmError::DimensionMismatch { expected: dim, got: x.len() });
        }
    }
    if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(SvmError::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !(ys.contains(&1.0) && ys.contains(&-1.0)) {
        return Err(SvmError::DegenerateData("both labels must be present".into()));
    }
    Ok(dim)
}

pub(crate) fn check_c(c: f64, name: &str) -> Result<(), SvmError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(SvmError::InvalidArgument(format!("{name} must be positive, got {c}")));
    }
    Ok(())
}

/// `sum alpha - 1/2 alpha' Y K Y alpha` for a row-major Gram matrix.
pub fn svm_dual_objective(gram: &[f64], ys: &[f64], alphas: &[f64]) -> f64 {
    let n = ys.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * ys[i] * ys[j] * gram[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

pub fn svm_fit(xs: &[Vec<f64>], ys: &[f64], kernel: KernelSpec, c: f64) -> Result<SvmModel, SvmError> {
    svm_fit_with(xs, ys, kernel, c, SolverOptions::default(), None)
}

/// As [`svm_fit`]; `trace` receives the dual objective after every step.
pub fn svm_fit_with(
    xs: &[Vec<f64>],
    ys: &[f64],
    kernel: KernelSpec,
    c: f64,
    options: SolverOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<SvmModel, SvmError> {
    let dim = validate_training(xs, ys)?;
    kernel.validate()?;
    check_c(c, "C")?;
    let n = xs.len();
    let k = kernel.gram(xs);
    let mut alpha = vec![0.0; n];
    // Gradient of 1/2 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let mut objective = 0.0;
    if let Some(t) = trace.as_deref_mut() {
        t.push(objective);
    }

    let can_up = |a: f64, y: f64| if y > 0.0 { a < c } else { a > 0.0 };
    let can_down = |a: f64, y: f64| if y > 0.0 { a > 0.0 } else { a < c };

    let tolerance = options.tolerance * (0..n).map(|t| k[t * n + t]).fold(1.0, f64::max);
    let mut iterations = 0;
    let residual = loop {
        // i maximises -y g over I_up, j minimises it over I_low.
        let mut best_up = (f64::NEG_INFINITY, usize::MAX);
        let mut best_low = (f64::INFINITY, usize::MAX);
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if can_up(alpha[t], ys[t]) && v > best_up.0 {
                best_up = (v, t);
            }
            if can_down(alpha[t], ys[t]) && v < best_low.0 {
                best_low = (v, t);
            }
        }
        let gap = best_up.0 - best_low.0;
        if best_up.1 == usize::MAX || best_low.1 == usize::MAX || gap <= tolerance {
            break gap.max(0.0);
        }
        if iterations >= options.max_iterations {
            return Err(SvmError::NoConvergence { iterations, residual: gap });
        }
        iterations += 1;
        let (i, j) = (best_up.1, best_low.1);
        // alpha_i += y_i t, alpha_j -= y_j t keeps sum alpha y fixed.
        let curvature = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
        let max_i = if ys[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let max_j = if ys[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let t_max = max_i.min(max_j);
        let t = if curvature > 1e-12 { (gap / curvature).min(t_max) } else { t_max };
        let old_i = alpha[i];
        let old_j = alpha[j];
        alpha[i] += ys[i] * t;
        alpha[j] -= ys[j] * t;
        if t == t_max {
            if max_i <= max_j {
                alpha[i] = if ys[i] > 0.0 { c } else { 0.0 };
            }
            if max_j <= max_i {
                alpha[j] = if ys[j] > 0.0 { 0.0 } else { c };
            }
        }
        alpha[i] = alpha[i].clamp(0.0, c);
        alpha[j] = alpha[j].clamp(0.0, c);
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for s in 0..n {
            grad[s] += ys[s] * (ys[i] * k[s * n + i] * di + ys[j] * k[s * n + j] * dj);
        }
        if let Some(tr) = trace.as_deref_mut() {
            objective = -(0..n).map(|s| 0.5 * alpha[s] * (grad[s] - 1.0)).sum::<f64>();
            tr.push(objective);
        }
    };

    // b = -y g on free vectors, else the middle of the feasible interval.
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for t in 0..n {
        let v = -ys[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free += 1;
        }
        if can_up(alpha[t], ys[t]) {
            lower = lower.max(v);
        }
        if can_down(alpha[t], ys[t]) {
            upper = upper.min(v);
        }
    }
    let bias = if free > 0 {
        free_sum / free as f64
    } else {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        }
    };

    let (support, support_coef): (Vec<_>, Vec<_>) =
        (0..n).filter(|&t| alpha[t] > 0.0).map(|t| (xs[t].clone(), alpha[t] * ys[t])).unzip();
    Ok(SvmModel {
        kernel,
        c,
        alphas: alpha,
        bias,
        support,
        support_coef,
        dim,
        report: SolverReport { iterations, kkt_residual: residual },
    })
}

pub(crate) fn expansion_margin(kernel: &KernelSpec, support: &[Vec<f64>], coef: &[f64], bias: f64, x: &[f64]) -> f64 {
    support.iter().zip(coef).map(|(s, a)| a * kernel.eval_unchecked(s, x)).sum::<f64>() + bias
}

/// `sign(0)` counts as `+1`.
pub fn sign_label(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl SvmModel {
    pub fn margin(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(expansion_margin(&self.kernel, &self.support, &self.support_coef, self.bias, x))
    }
}

/// Label in `{-1, +1}` and the margin.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<(f64, f64), SvmError> {
    let m = model.margin(x)?;
    Ok((sign_label(m), m))
}

impl BinaryClassifier for SvmModel {
    fn margin(&self, x: &[f64]) -> Result<f64, SvmError> {
        SvmModel::margin(self, x)
    }
}

/// Per-feature zero mean and unit variance, fit on training data only.
/// Constant features keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(xs: &[Vec<f64>]) -> Result<Self, SvmError> {
        let first = xs.first().ok_or_else(|| SvmError::InvalidArgument("cannot standardize an empty set".into()))?;
        let dim = first.len();
        let n = xs.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in xs {
            if x.len() != dim {
                return Err(SvmError::DimensionMismatch { expected: dim, got: x.len() });
            }
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn transform_all(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.transform(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_hard_margin() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let ys = vec![-1.0, 1.0];
        let m = svm_fit(&xs, &ys, KernelSpec::linear(), 10.0).unwrap();
        assert!((m.alphas[0] - 0.5).abs() < 1e-9 && (m.alphas[1] - 0.5).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-9);
        let (label, margin) = svm_predict(&m, &[0.5]).unwrap();
        assert_eq!(label, 1.0);
        assert!((margin - 0.5).abs() < 1e-9);
        assert_eq!(svm_predict(&m, &[1.0]).unwrap().0, 1.0);
        assert_eq!(sign_label(0.0), 1.0);
        assert!(svm_predict(&m, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_margin_resolves_to_positive() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let m = svm_fit(&xs, &[-1.0, 1.0], KernelSpec::linear(), 10.0).unwrap();
        let mut exact = m.clone();
        exact.bias = 0.0;
        assert_eq!(svm_predict(&exact, &[0.0]).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn conflicting_duplicates_sit_at_the_bound() {
        let xs = vec![vec![0.3, 0.1], vec![0.3, 0.1]];
        let m = svm_fit(&xs, &[1.0, -1.0], KernelSpec::rbf(1.0), 0.1).unwrap();
        assert_eq!(m.alphas, vec![0.1, 0.1]);
    }

    #[test]
    fn degenerate_inputs() {
        let xs = vec![vec![0.0], vec![1.0]];
        assert!(matches!(svm_fit(&xs, &[1.0, 1.0], KernelSpec::linear(), 1.0), Err(SvmError::DegenerateData(_))));
        assert!(matches!(svm_fit(&xs[..1], &[1.0], KernelSpec::linear(), 1.0), Err(SvmError::DegenerateData(_))));
        assert!(svm_fit(&xs, &[1.0, 0.0], KernelSpec::linear(), 1.0).is_err());
        assert!(svm_fit(&xs, &[1.0, -1.0], KernelSpec::linear(), 0.0).is_err());
        let opts = SolverOptions { tolerance: 1e-12, max_iterations: 0 };
        let xs = vec![vec![0.0], vec![1.0], vec![0.5]];
        assert!(matches!(
            svm_fit_with(&xs, &[1.0, -1.0, 1.0], KernelSpec::rbf(1.0), 1.0, opts, None),
            Err(SvmError::NoConvergence { .. })
        ));
    }

    fn blobs(rng: &mut ChaCha8Rng, n: usize, sep: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            xs.push(vec![y * sep + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn separable_data_is_fit_exactly_and_objective_rises() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let (xs, ys) = blobs(&mut rng, 30, 2.0);
            let mut trace = Vec::new();
            let m = svm_fit_with(&xs, &ys, KernelSpec::rbf(0.5), 1e4, SolverOptions::default(), Some(&mut trace)).unwrap();
            assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            let gram = m.kernel.gram(&xs);
            assert!((trace.last().unwrap() - svm_dual_objective(&gram, &ys, &m.alphas)).abs() < 1e-8);
            for (x, y) in xs.iter().zip(&ys) {
                assert_eq!(svm_predict(&m, x).unwrap().0, *y);
            }
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for round in 0..20 {
            let (xs, ys) = blobs(&mut rng, 20, 0.4);
            let c = [0.5, 5.0, 50.0][round % 3];
            let m = svm_fit(&xs, &ys, KernelSpec::rbf(1.0), c).unwrap();
            let eq: f64 = m.alphas.iter().zip(&ys).map(|(a, y)| a * y).sum();
            assert!(eq.abs() < 1e-8);
            for ((x, y), a) in xs.iter().zip(&ys).zip(&m.alphas) {
                assert!((0.0..=c).contains(a));
                let yf = y * m.margin(x).unwrap();
                let xi = (1.0 - yf).max(0.0);
                assert!(a * (yf - 1.0 + xi) <= 1e-6);
                if *a > 1e-9 && *a < c - 1e-9 {
                    assert!((yf - 1.0).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn training_order_does_not_change_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (xs, ys) = blobs(&mut rng, 16, 0.5);
        let m = svm_fit(&xs, &ys, KernelSpec::rbf(1.0), 5.0).unwrap();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.reverse();
        order.swap(2, 9);
        let xs2: Vec<_> = order.iter().map(|&i| xs[i].clone()).collect();
        let ys2: Vec<_> = order.iter().map(|&i| ys[i]).collect();
        let m2 = svm_fit(&xs2, &ys2, KernelSpec::rbf(1.0), 5.0).unwrap();
        for _ in 0..200 {
            let x = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let (a, b) = (m.margin(&x).unwrap(), m2.margin(&x).unwrap());
            assert!((a - b).abs() < 1e-5 || a.signum() == b.signum());
        }
    }

    #[test]
    fn standardizer() {
        let xs = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&xs).unwrap();
        assert_eq!(s.transform(&[1.0, 5.0]), vec![-1.0, 0.0]);
        assert_eq!(s.transform(&[3.0, 7.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn model_json_round_trip() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let m = svm_fit(&xs, &[-1.0, 1.0], KernelSpec::rbf(0.3), 2.0).unwrap();
        let back: SvmModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
