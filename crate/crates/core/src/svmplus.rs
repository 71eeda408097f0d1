//! SVM+ with a correcting function in the privileged space.
//!
//! The dual has two equality constraints, `sum alpha y = 0` and
//! `sum (alpha + beta - C) = 0`. The elementary feasible directions of that
//! constraint matrix are: a pair of betas, a same-label pair of alphas, and
//! an opposite-label alpha pair moving together against one beta at twice the
//! rate. The solver takes the steepest of these each step with an exact,
//! clipped line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::svm::{check_c, expansion_margin, sign_label, validate_training, BinaryClassifier, KernelSpec, SolverOptions, SvmError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmPlusReport {
    pub iterations: usize,
    /// Largest first-order gain along any feasible direction at exit.
    pub max_gain: f64,
    /// Worst KKT violation with the recovered biases.
    pub kkt_residual: f64,
}

/// `x* -> (1/C*) sum (alpha + beta - C) K*(x*_k, x*) + b*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectingFunction {
    pub kernel: KernelSpec,
    pub points: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub dim: usize,
}

impl CorrectingFunction {
    pub fn value(&self, x_star: &[f64]) -> Result<f64, SvmError> {
        if x_star.len() != self.dim {
            return Err(SvmError::DimensionMismatch { expected: self.dim, got: x_star.len() });
        }
        Ok(expansion_margin(&self.kernel, &self.points, &self.coef, self.bias, x_star))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmPlusModel {
    pub kernel: KernelSpec,
    pub kernel_star: KernelSpec,
    pub c: f64,
    pub c_star: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub bias: f64,
    pub bias_star: f64,
    pub support: Vec<Vec<f64>>,
    pub support_coef: Vec<f64>,
    pub dim: usize,
    /// Training-time diagnostic; dropping it leaves prediction untouched.
    pub correcting: Option<CorrectingFunction>,
    pub report: SvmPlusReport,
}

impl SvmPlusModel {
    /// `sum y_k alpha_k K(x_k, x) + b`, decision space only.
    pub fn margin(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(expansion_margin(&self.kernel, &self.support, &self.support_coef, self.bias, x))
    }

    pub fn strip_privileged(&mut self) {
        self.correcting = None;
    }
}

impl BinaryClassifier for SvmPlusModel {
    fn margin(&self, x: &[f64]) -> Result<f64, SvmError> {
        SvmPlusModel::margin(self, x)
    }
}

pub fn svmplus_predict(model: &SvmPlusModel, x: &[f64]) -> Result<(f64, f64), SvmError> {
    let m = model.margin(x)?;
    Ok((sign_label(m), m))
}

pub fn correcting_value(model: &SvmPlusModel, x_star: &[f64]) -> Result<f64, SvmError> {
    model
        .correcting
        .as_ref()
        .ok_or_else(|| SvmError::InvalidArgument("privileged data was stripped from this model".into()))?
        .value(x_star)
}

/// Dual objective for row-major Gram matrices `k` and `ks`.
#[allow(clippy::too_many_arguments)]
pub fn svmplus_dual_objective(k: &[f64], ks: &[f64], ys: &[f64], alphas: &[f64], betas: &[f64], c: f64, c_star: f64) -> f64 {
    let n = ys.len();
    let u: Vec<f64> = (0..n).map(|i| alphas[i] + betas[i] - c).collect();
    let mut quad = 0.0;
    let mut quad_star = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * ys[i] * ys[j] * k[i * n + j];
            quad_star += u[i] * u[j] * ks[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad - quad_star / (2.0 * c_star)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    /// beta_i up, beta_j down.
    Betas(usize, usize),
    /// alpha_i up, alpha_j down, same label.
    Alphas(usize, usize),
    /// alpha_i (y=+1) and alpha_j (y=-1) up, beta_k down twice as fast.
    Up(usize, usize, usize),
    /// The reverse of `Up`.
    Down(usize, usize, usize),
}

struct State<'a> {
    n: usize,
    k: &'a [f64],
    ks: &'a [f64],
    ys: &'a [f64],
    c: f64,
    c_star: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `sum_j y_j alpha_j K_kj`.
    f: Vec<f64>,
    /// `sum_j K*_kj (alpha_j + beta_j - C)`.
    s: Vec<f64>,
}

impl State<'_> {
    fn g(&self, i: usize) -> f64 {
        1.0 - self.ys[i] * self.f[i] - self.s[i] / self.c_star
    }

    fn h(&self, i: usize) -> f64 {
        -self.s[i] / self.c_star
    }

    fn refresh(&mut self) {
        let n = self.n;
        for r in 0..n {
            let mut f = 0.0;
            let mut s = 0.0;
            for j in 0..n {
                f += self.ys[j] * self.alpha[j] * self.k[r * n + j];
                s += (self.alpha[j] + self.beta[j] - self.c) * self.ks[r * n + j];
            }
            self.f[r] = f;
            self.s[r] = s;
        }
    }

    fn move_alpha(&mut self, i: usize, delta: f64) {
        let n = self.n;
        self.alpha[i] += delta;
        let yi = self.ys[i];
        for r in 0..n {
            self.f[r] += yi * delta * self.k[r * n + i];
            self.s[r] += delta * self.ks[r * n + i];
        }
    }

    fn move_beta(&mut self, i: usize, delta: f64) {
        let n = self.n;
        self.beta[i] += delta;
        for r in 0..n {
            self.s[r] += delta * self.ks[r * n + i];
        }
    }

    /// Steepest elementary direction and its first-order gain.
    fn select(&self) -> (f64, Option<Step>) {
        let n = self.n;
        let mut h_max = (f64::NEG_INFINITY, 0);
        let mut h_min_pos = (f64::INFINITY, usize::MAX);
        // Per label (index 0 for +1, 1 for -1): max G, min G over alpha > 0.
        let mut g_max = [(f64::NEG_INFINITY, usize::MAX); 2];
        let mut g_min_pos = [(f64::INFINITY, usize::MAX); 2];
        for i in 0..n {
            let h = self.h(i);
            let g = self.g(i);
            if h > h_max.0 {
                h_max = (h, i);
            }
            if self.beta[i] > 0.0 && h < h_min_pos.0 {
                h_min_pos = (h, i);
            }
            let l = (self.ys[i] < 0.0) as usize;
            if g > g_max[l].0 {
                g_max[l] = (g, i);
            }
            if self.alpha[i] > 0.0 && g < g_min_pos[l].0 {
                g_min_pos[l] = (g, i);
            }
        }
        let mut best = (0.0, None);
        let mut consider = |gain: f64, step: Step| {
            if gain.is_finite() && gain > best.0 {
                best = (gain, Some(step));
            }
        };
        if h_min_pos.1 != usize::MAX {
            consider(h_max.0 - h_min_pos.0, Step::Betas(h_max.1, h_min_pos.1));
        }
        for l in 0..2 {
            if g_min_pos[l].1 != usize::MAX && g_max[l].1 != usize::MAX {
                consider(g_max[l].0 - g_min_pos[l].0, Step::Alphas(g_max[l].1, g_min_pos[l].1));
            }
        }
        if g_max[0].1 != usize::MAX && g_max[1].1 != usize::MAX && h_min_pos.1 != usize::MAX {
            consider(g_max[0].0 + g_max[1].0 - 2.0 * h_min_pos.0, Step::Up(g_max[0].1, g_max[1].1, h_min_pos.1));
        }
        if g_min_pos[0].1 != usize::MAX && g_min_pos[1].1 != usize::MAX {
            consider(2.0 * h_max.0 - g_min_pos[0].0 - g_min_pos[1].0, Step::Down(g_min_pos[0].1, g_min_pos[1].1, h_max.1));
        }
        best
    }

    fn kk(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    fn kst(&self, i: usize, j: usize) -> f64 {
        self.ks[i * self.n + j]
    }

    fn apply(&mut self, step: Step, gain: f64) {
        let cs = self.c_star;
        let (curvature, t_max) = match step {
            Step::Betas(i, j) => ((self.kst(i, i) + self.kst(j, j) - 2.0 * self.kst(i, j)) / cs, self.beta[j]),
            Step::Alphas(i, j) => (
                self.kk(i, i) + self.kk(j, j) - 2.0 * self.kk(i, j) + (self.kst(i, i) + self.kst(j, j) - 2.0 * self.kst(i, j)) / cs,
                self.alpha[j],
            ),
            Step::Up(i, j, l) | Step::Down(i, j, l) => {
                let dec = self.kk(i, i) + self.kk(j, j) - 2.0 * self.kk(i, j);
                let pri = self.kst(i, i) + self.kst(j, j) + 4.0 * self.kst(l, l) + 2.0 * self.kst(i, j)
                    - 4.0 * self.kst(i, l)
                    - 4.0 * self.kst(j, l);
                let t_max = match step {
                    Step::Up(..) => 0.5 * self.beta[l],
                    _ => self.alpha[i].min(self.alpha[j]),
                };
                (dec + pri / cs, t_max)
            }
        };
        let clipped = curvature <= 1e-14 || gain / curvature >= t_max;
        let t = if clipped { t_max } else { gain / curvature };
        match step {
            Step::Betas(i, j) => {
                self.move_beta(i, t);
                self.move_beta(j, -t);
                if clipped {
                    self.beta[j] = 0.0;
                }
            }
            Step::Alphas(i, j) => {
                self.move_alpha(i, t);
                self.move_alpha(j, -t);
                if clipped {
                    self.alpha[j] = 0.0;
                }
            }
            Step::Up(i, j, l) => {
                self.move_alpha(i, t);
                self.move_alpha(j, t);
                self.move_beta(l, -2.0 * t);
                if clipped {
                    self.beta[l] = 0.0;
                }
            }
            Step::Down(i, j, l) => {
                let (limit_i, limit_j) = (self.alpha[i] <= self.alpha[j], self.alpha[j] <= self.alpha[i]);
                self.move_alpha(i, -t);
                self.move_alpha(j, -t);
                self.move_beta(l, 2.0 * t);
                if clipped {
                    if limit_i {
                        self.alpha[i] = 0.0;
                    }
                    if limit_j {
                        self.alpha[j] = 0.0;
                    }
                }
            }
        }
        for v in self.alpha.iter_mut().chain(self.beta.iter_mut()) {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    fn support_size(&self) -> usize {
        self.alpha.iter().chain(&self.beta).filter(|&&v| v > 0.0).count()
    }

    /// Newton step to the optimum of the current face (positive variables
    /// free, the rest held at zero), cut back to stay non-negative.
    fn polish(&mut self) {
        let n = self.n;
        let vars: Vec<usize> = (0..2 * n).filter(|&v| if v < n { self.alpha[v] > 0.0 } else { self.beta[v - n] > 0.0 }).collect();
        let m = vars.len();
        if m == 0 {
            return;
        }
        let cs = self.c_star;
        let q = |a: usize, b: usize| -> f64 {
            let (i, j) = (a % n, b % n);
            let pri = self.ks[i * n + j] / cs;
            if a < n && b < n {
                self.ys[i] * self.ys[j] * self.k[i * n + j] + pri
            } else {
                pri
            }
        };
        let dim = m + 2;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for (r, &a) in vars.iter().enumerate() {
            for (c, &b) in vars.iter().enumerate() {
                kkt[(r, c)] = q(a, b);
            }
            let y_row = if a < n { self.ys[a] } else { 0.0 };
            kkt[(r, m)] = y_row;
            kkt[(m, r)] = y_row;
            kkt[(r, m + 1)] = 1.0;
            kkt[(m + 1, r)] = 1.0;
            rhs[r] = if a < n { self.g(a) } else { self.h(a - n) };
        }
        let scale = kkt.amax().max(1.0);
        let Ok(sol) = kkt.svd(true, true).solve(&rhs, 1e-12 * scale) else {
            return;
        };
        let d: Vec<f64> = (0..m).map(|r| sol[r]).collect();
        let slope: f64 = d.iter().zip(rhs.iter()).map(|(a, b)| a * b).sum();
        if slope.is_nan() || slope <= 0.0 || d.iter().any(|v| !v.is_finite()) {
            return;
        }
        let value = |v: usize| if v < n { self.alpha[v] } else { self.beta[v - n] };
        let mut t = 1.0;
        let mut limit = None;
        for (r, &v) in vars.iter().enumerate() {
            if d[r] < 0.0 {
                let cap = value(v) / -d[r];
                if cap < t {
                    t = cap;
                    limit = Some(v);
                }
            }
        }
        for (r, &v) in vars.iter().enumerate() {
            let slot = if v < n { &mut self.alpha[v] } else { &mut self.beta[v - n] };
            *slot = (*slot + t * d[r]).max(0.0);
        }
        if let Some(v) = limit {
            if v < n {
                self.alpha[v] = 0.0;
            } else {
                self.beta[v - n] = 0.0;
            }
        }
    }

    /// Least squares over the active rows `[y_k, 1] (b, b*) = G_k` for
    /// `alpha_k > 0` and `[0, 1] (b, b*) = H_k` for `beta_k > 0`; when these
    /// do not pin both biases the free one is placed inside the interval
    /// allowed by the inactive rows.
    fn biases(&self) -> (f64, f64) {
        let n = self.n;
        let (mut m00, mut m01, mut m11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut beta_rows = 0usize;
        for i in 0..n {
            if self.alpha[i] > 0.0 {
                let (y, g) = (self.ys[i], self.g(i));
                m00 += y * y;
                m01 += y;
                m11 += 1.0;
                r0 += y * g;
                r1 += g;
            }
            if self.beta[i] > 0.0 {
                m11 += 1.0;
                r1 += self.h(i);
                beta_rows += 1;
            }
        }
        let det = m00 * m11 - m01 * m01;
        if det > 1e-9 * (m00 + m11).powi(2) {
            let b = (m11 * r0 - m01 * r1) / det;
            let bs = (m00 * r1 - m01 * r0) / det;
            return (b, bs);
        }
        // Only beta rows active (every alpha is zero): b* from them, b from
        // the alpha inequalities G_k - y_k b - b* <= 0.
        let bs = if beta_rows > 0 { r1 / m11 } else { (0..n).map(|i| self.h(i)).fold(f64::NEG_INFINITY, f64::max) };
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let v = self.g(i) - bs;
            if self.ys[i] > 0.0 {
                lo = lo.max(v);
            } else {
                hi = hi.min(-v);
            }
        }
        let b = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        };
        (b, bs)
    }

    /// Reduced-cost sign violations plus complementary slackness.
    fn kkt_residual(&self, b: f64, bs: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let ra = self.g(i) - self.ys[i] * b - bs;
            let rb = self.h(i) - bs;
            worst = worst.max(ra.max(0.0)).max(rb.max(0.0));
            worst = worst.max((self.alpha[i] * ra).abs()).max((self.beta[i] * rb).abs());
        }
        worst
    }
}

pub fn svmplus_fit(
    xs: &[Vec<f64>],
    xs_star: &[Vec<f64>],
    ys: &[f64],
    kernel: KernelSpec,
    kernel_star: KernelSpec,
    c: f64,
    c_star: f64,
) -> Result<SvmPlusModel, SvmError> {
    svmplus_fit_with(xs, xs_star, ys, kernel, kernel_star, c, c_star, SolverOptions::default(), None)
}

/// As [`svmplus_fit`]; `trace` receives the dual objective after every step.
#[allow(clippy::too_many_arguments)]
pub fn svmplus_fit_with(
    xs: &[Vec<f64>],
    xs_star: &[Vec<f64>],
    ys: &[f64],
    kernel: KernelSpec,
    kernel_star: KernelSpec,
    c: f64,
    c_star: f64,
    options: SolverOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<SvmPlusModel, SvmError> {
    let dim = validate_training(xs, ys)?;
    if xs_star.len() != xs.len() {
        return Err(SvmError::InvalidArgument(format!(
            "privileged vectors must accompany every point: {} of {}",
            xs_star.len(),
            xs.len()
        )));
    }
    let dim_star = xs_star[0].len();
    if let Some(bad) = xs_star.iter().find(|x| x.len() != dim_star) {
        return Err(SvmError::DimensionMismatch { expected: dim_star, got: bad.len() });
    }
    kernel.validate()?;
    kernel_star.validate()?;
    check_c(c, "C")?;
    check_c(c_star, "C*")?;

    let n = xs.len();
    let k = kernel.gram(xs);
    let ks = kernel_star.gram(xs_star);
    // alpha = 0, beta = C satisfies both equality constraints.
    let mut st = State {
        n,
        k: &k,
        ks: &ks,
        ys,
        c,
        c_star,
        alpha: vec![0.0; n],
        beta: vec![c; n],
        f: vec![0.0; n],
        s: vec![0.0; n],
    };
    let objective = |st: &State| svmplus_dual_objective(&k, &ks, ys, &st.alpha, &st.beta, c, c_star);
    if let Some(t) = trace.as_deref_mut() {
        t.push(objective(&st));
    }

    let tolerance = options.tolerance * (0..n).map(|i| k[i * n + i] + ks[i * n + i] / c_star).fold(1.0, f64::max);
    let mut iterations = 0usize;
    let mut stable = 0usize;
    let max_gain = loop {
        let (mut gain, mut step) = st.select();
        if gain <= tolerance {
            // Confirm against freshly accumulated sums before stopping.
            st.refresh();
            (gain, step) = st.select();
            if gain <= tolerance {
                break gain;
            }
        }
        if iterations >= options.max_iterations {
            let (b, bs) = st.biases();
            return Err(SvmError::NoConvergence { iterations, residual: st.kkt_residual(b, bs).max(gain) });
        }
        iterations += 1;
        let support_before = st.support_size();
        st.apply(step.expect("positive gain has a step"), gain);
        if st.support_size() != support_before {
            stable = 0;
        } else {
            stable += 1;
        }
        if stable >= 2 * n + 8 {
            st.polish();
            st.refresh();
            stable = 0;
        } else if iterations.is_multiple_of(4096) {
            st.refresh();
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(&st));
        }
    };

    let (bias, bias_star) = st.biases();
    let kkt_residual = st.kkt_residual(bias, bias_star);
    let (support, support_coef): (Vec<_>, Vec<_>) =
        (0..n).filter(|&i| st.alpha[i] > 0.0).map(|i| (xs[i].clone(), st.alpha[i] * ys[i])).unzip();
    let coef = (0..n).map(|i| (st.alpha[i] + st.beta[i] - c) / c_star).collect();
    let correcting = CorrectingFunction { kernel: kernel_star, points: xs_star.to_vec(), coef, bias: bias_star, dim: dim_star };
    Ok(SvmPlusModel {
        kernel,
        kernel_star,
        c,
        c_star,
        alphas: st.alpha,
        betas: st.beta,
        bias,
        bias_star,
        support,
        support_coef,
        dim,
        correcting: Some(correcting),
        report: SvmPlusReport { iterations, max_gain, kkt_residual },
    })
}

/// Primal objective at the reconstruction `w = sum alpha y phi`,
/// `w* = (1/C*) sum (alpha + beta - C) psi`, together with the worst
/// violation of the two primal constraints over the training points.
pub fn primal_objective(model: &SvmPlusModel, xs: &[Vec<f64>], xs_star: &[Vec<f64>], ys: &[f64]) -> Result<(f64, f64), SvmError> {
    let corr = model
        .correcting
        .as_ref()
        .ok_or_else(|| SvmError::InvalidArgument("privileged data was stripped from this model".into()))?;
    let n = ys.len();
    let k = model.kernel.gram(xs);
    let ks = model.kernel_star.gram(xs_star);
    let u: Vec<f64> = (0..n).map(|i| model.alphas[i] + model.betas[i] - model.c).collect();
    let mut w2 = 0.0;
    let mut ws2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            w2 += model.alphas[i] * model.alphas[j] * ys[i] * ys[j] * k[i * n + j];
            ws2 += u[i] * u[j] * ks[i * n + j];
        }
    }
    let mut slack_sum = 0.0;
    let mut violation: f64 = 0.0;
    for i in 0..n {
        let xi = corr.value(&xs_star[i])?;
        slack_sum += xi;
        let yf = ys[i] * model.margin(&xs[i])?;
        violation = violation.max(-xi).max(1.0 - xi - yf);
    }
    let c_star = model.c_star;
    Ok((0.5 * w2 + 0.5 * c_star * ws2 / (c_star * c_star) + model.c * slack_sum, violation))
}
