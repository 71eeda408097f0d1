use serde::{Deserialize, Serialize};

use super::SvmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Polynomial,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "three")]
    pub degree: u32,
    #[serde(default = "one")]
    pub coef0: f64,
}

fn one() -> f64 {
    1.0
}

fn three() -> u32 {
    3
}

/// Polynomial defaults when only `gamma` is given.
pub const DEFAULT_POLY_DEGREE: u32 = 3;
pub const DEFAULT_POLY_COEF0: f64 = 1.0;

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec { kind: KernelKind::Rbf, gamma, degree: DEFAULT_POLY_DEGREE, coef0: DEFAULT_POLY_COEF0 }
    }

    pub fn polynomial(gamma: f64, degree: u32, coef0: f64) -> Self {
        KernelSpec { kind: KernelKind::Polynomial, gamma, degree, coef0 }
    }

    pub fn linear() -> Self {
        KernelSpec { kind: KernelKind::Linear, gamma: 1.0, degree: DEFAULT_POLY_DEGREE, coef0: DEFAULT_POLY_COEF0 }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SvmError::InvalidArgument(format!("kernel gamma must be positive, got {}", self.gamma)));
        }
        if self.degree == 0 {
            return Err(SvmError::InvalidArgument("polynomial degree must be at least 1".into()));
        }
        Ok(())
    }

    /// Kernel value without the dimension check.
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Polynomial => (self.gamma * dot(a, b) + self.coef0).powi(self.degree as i32),
            KernelKind::Linear => dot(a, b),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64, SvmError> {
        if a.len() != b.len() {
            return Err(SvmError::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        Ok(self.eval_unchecked(a, b))
    }

    /// Row-major Gram matrix.
    pub fn gram(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let n = xs.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.eval_unchecked(&xs[i], &xs[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64, SvmError> {
    spec.eval(a, b)
}
