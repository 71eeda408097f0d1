//! Rydberg chain: Hamiltonian in units of `a`, exact ground states, density-wave
//! order parameters and the thresholded phase label.
//!
//! Basis state `s` has bit `i` set when atom `i + 1` is excited.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DENSE_MAX_ATOMS: usize = 13;
pub const MATRIX_FREE_MAX_ATOMS: usize = 24;
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const ORDER_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error)]
pub enum RydbergError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{n} atoms exceeds the {limit}-atom budget of the {path} path")]
    Capacity { n: usize, limit: usize, path: &'static str },
    #[error("ground state did not converge: residual {residual:e} after {iterations} Lanczos steps")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("LAPACK dsyevr failed with info = {0}")]
    Lapack(i32),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("grid line {line}: {reason}")]
    Grid { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RydbergParams {
    pub n_atoms: usize,
    pub delta_over_omega: f64,
    pub r0_over_a: f64,
    #[serde(default = "unit")]
    pub omega: f64,
}

fn unit() -> f64 {
    1.0
}

impl RydbergParams {
    pub fn new(n_atoms: usize, delta_over_omega: f64, r0_over_a: f64) -> Self {
        Self { n_atoms, delta_over_omega, r0_over_a, omega: 1.0 }
    }

    pub fn validate(&self) -> Result<(), RydbergError> {
        if self.n_atoms == 0 {
            return Err(RydbergError::InvalidArgument("need at least one atom".into()));
        }
        if !(self.r0_over_a > 0.0 && self.r0_over_a.is_finite()) {
            return Err(RydbergError::InvalidArgument(format!("R0/a must be positive, got {}", self.r0_over_a)));
        }
        if !self.delta_over_omega.is_finite() || !self.omega.is_finite() {
            return Err(RydbergError::InvalidArgument("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// `H = (Ω/2) Σ σx_i - Δ Σ n_i + V Σ_{i<j} n_i n_j / |i-j|^6`, open chain,
/// stored as its diagonal plus the implicit flip term.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub n_atoms: usize,
    pub rabi: f64,
    pub detuning: f64,
    /// `Ω (R0/a)^6`.
    pub interaction: f64,
    diagonal: Vec<f64>,
}

impl Hamiltonian {
    /// Direct coefficients, for cases the two ratios cannot express (`Ω = 0`).
    pub fn from_coefficients(n_atoms: usize, rabi: f64, detuning: f64, interaction: f64) -> Result<Self, RydbergError> {
        if n_atoms == 0 {
            return Err(RydbergError::InvalidArgument("need at least one atom".into()));
        }
        if n_atoms > MATRIX_FREE_MAX_ATOMS {
            return Err(RydbergError::Capacity { n: n_atoms, limit: MATRIX_FREE_MAX_ATOMS, path: "matrix-free" });
        }
        let dim = 1usize << n_atoms;
        let tail: Vec<f64> = (1..n_atoms).map(|d| interaction / (d as f64).powi(6)).collect();
        let diagonal = (0..dim)
            .map(|s| {
                let mut e = -detuning * (s.count_ones() as f64);
                for i in 0..n_atoms {
                    if s >> i & 1 == 1 {
                        for j in i + 1..n_atoms {
                            if s >> j & 1 == 1 {
                                e += tail[j - i - 1];
                            }
                        }
                    }
                }
                e
            })
            .collect();
        Ok(Self { n_atoms, rabi, detuning, interaction, diagonal })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let half = 0.5 * self.rabi;
        for (s, out) in y.iter_mut().enumerate() {
            let mut acc = self.diagonal[s] * x[s];
            for i in 0..self.n_atoms {
                acc += half * x[s ^ (1 << i)];
            }
            *out = acc;
        }
    }

    pub fn dense(&self) -> Result<Vec<f64>, RydbergError> {
        if self.n_atoms > DENSE_MAX_ATOMS {
            return Err(RydbergError::Capacity { n: self.n_atoms, limit: DENSE_MAX_ATOMS, path: "dense" });
        }
        let dim = self.dim();
        let mut m = vec![0.0; dim * dim];
        for s in 0..dim {
            m[s * dim + s] = self.diagonal[s];
            for i in 0..self.n_atoms {
                m[s * dim + (s ^ (1 << i))] = 0.5 * self.rabi;
            }
        }
        Ok(m)
    }

    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        dot(x, &y) / dot(x, x)
    }
}

pub fn build_hamiltonian(params: &RydbergParams) -> Result<Hamiltonian, RydbergError> {
    params.validate()?;
    Hamiltonian::from_coefficients(
        params.n_atoms,
        params.omega,
        params.omega * params.delta_over_omega,
        params.omega * params.r0_over_a.powi(6),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub amplitudes: Vec<f64>,
    pub energy: f64,
}

impl GroundState {
    /// Computational basis state; `pattern[j]` is atom `j + 1`.
    pub fn product(pattern: &[bool]) -> Self {
        let index = pattern.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| 1usize << i).sum::<usize>();
        let mut amplitudes = vec![0.0; 1 << pattern.len()];
        amplitudes[index] = 1.0;
        Self { amplitudes, energy: f64::NAN }
    }

    pub fn n_atoms(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn residual(&self, h: &Hamiltonian) -> f64 {
        let mut y = vec![0.0; self.amplitudes.len()];
        h.apply(&self.amplitudes, &mut y);
        y.iter().zip(&self.amplitudes).map(|(a, b)| (a - self.energy * b).powi(2)).sum::<f64>().sqrt()
    }

    pub fn densities(&self) -> Vec<f64> {
        let n = self.n_atoms();
        let mut out = vec![0.0; n];
        for (s, a) in self.amplitudes.iter().enumerate() {
            let w = a * a;
            if w == 0.0 {
                continue;
            }
            for (j, d) in out.iter_mut().enumerate() {
                if s >> j & 1 == 1 {
                    *d += w;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

pub fn ground_state(h: &Hamiltonian) -> Result<GroundState, RydbergError> {
    ground_state_with(h, Solver::Auto)
}

pub fn ground_state_with(h: &Hamiltonian, solver: Solver) -> Result<GroundState, RydbergError> {
    match solver {
        Solver::Dense => dense_ground_state(h),
        Solver::Lanczos => lanczos_ground_state(h),
        Solver::Auto if h.n_atoms <= 6 => dense_ground_state(h),
        Solver::Auto => lanczos_ground_state(h),
    }
}

/// Lowest eigenpair from `dsyevr` restricted to index 1. Sign fixed so the
/// overlap with the staggered vector is non-negative.
pub fn dense_ground_state(h: &Hamiltonian) -> Result<GroundState, RydbergError> {
    let mut a = h.dense()?;
    let dim = h.dim() as i32;
    let (jobz, range, uplo) = (b'V' as CChar, b'I' as CChar, b'U' as CChar);
    let (vl, vu, il, iu, abstol) = (0.0, 0.0, 1, 1, 0.0);
    let mut m = 0;
    let mut w = vec![0.0; h.dim()];
    let mut z = vec![0.0; h.dim()];
    let mut isuppz = vec![0; 2];
    let mut info = 0;
    let mut work_query = 0.0;
    let mut iwork_query = 0;
    let mut call = |a: &mut [f64], work: &mut [f64], lwork: i32, iwork: &mut [i32], liwork: i32, info: &mut i32| unsafe {
        lapack_sys::dsyevr_(
            &jobz, &range, &uplo, &dim, a.as_mut_ptr(), &dim, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), z.as_mut_ptr(), &dim, isuppz.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, info,
        )
    };
    call(&mut a, std::slice::from_mut(&mut work_query), -1, std::slice::from_mut(&mut iwork_query), -1, &mut info);
    if info != 0 {
        return Err(RydbergError::Lapack(info));
    }
    let lwork = work_query as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0; iwork_query.max(1) as usize];
    call(&mut a, &mut work, lwork, &mut iwork, iwork_query, &mut info);
    if info != 0 {
        return Err(RydbergError::Lapack(info));
    }
    if dot(&z, &staggered(h.n_atoms)) < 0.0 {
        z.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(GroundState { amplitudes: z, energy: w[0] })
}

type CChar = std::ffi::c_char;

/// `(-1)^{popcount(s)} / sqrt(dim)`. Under `Π σz` the flip term turns negative
/// and the ground state becomes positive, so this vector always overlaps it.
pub fn staggered(n_atoms: usize) -> Vec<f64> {
    let dim = 1usize << n_atoms;
    let a = 1.0 / (dim as f64).sqrt();
    (0..dim).map(|s| if s.count_ones() % 2 == 0 { a } else { -a }).collect()
}

const KRYLOV_DIM: usize = 120;
const MAX_LANCZOS_STEPS: usize = 40_000;

/// Explicitly restarted Lanczos with full reorthogonalization.
pub fn lanczos_ground_state(h: &Hamiltonian) -> Result<GroundState, RydbergError> {
    let dim = h.dim();
    let scale = h.diagonal.iter().fold(0.0f64, |m, d| m.max(d.abs())) + 0.5 * h.rabi.abs() * h.n_atoms as f64;
    let mut v = staggered(h.n_atoms);
    let mut hv = vec![0.0; dim];
    let mut total = 0usize;
    let mut residual = f64::INFINITY;
    while total < MAX_LANCZOS_STEPS {
        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let ritz = loop {
            let j = basis.len() - 1;
            h.apply(&basis[j], &mut hv);
            total += 1;
            let alpha = dot(&hv, &basis[j]);
            alphas.push(alpha);
            // second Gram-Schmidt pass only after heavy cancellation
            let before = norm(&hv);
            for b in &basis {
                let c = dot(&hv, b);
                axpy(-c, b, &mut hv);
            }
            let mut beta = norm(&hv);
            if beta < 0.7 * before {
                for b in &basis {
                    let c = dot(&hv, b);
                    axpy(-c, b, &mut hv);
                }
                beta = norm(&hv);
            }
            let full = basis.len() >= KRYLOV_DIM.min(dim);
            let breakdown = beta <= 1e-13 * scale.max(1.0);
            if full || breakdown || basis.len().is_multiple_of(10) {
                let ritz = lowest_ritz(&alphas, &betas);
                let estimate = beta * ritz.1.last().unwrap().abs();
                if full || breakdown || estimate <= 0.1 * RESIDUAL_TOLERANCE {
                    break ritz;
                }
            }
            betas.push(beta);
            basis.push(hv.iter().map(|x| x / beta).collect());
        };
        let mut psi = vec![0.0; dim];
        for (c, b) in ritz.1.iter().zip(&basis) {
            axpy(*c, b, &mut psi);
        }
        let len = norm(&psi);
        psi.iter_mut().for_each(|x| *x /= len);
        h.apply(&psi, &mut hv);
        total += 1;
        let energy = dot(&psi, &hv);
        residual = hv.iter().zip(&psi).map(|(a, b)| (a - energy * b).powi(2)).sum::<f64>().sqrt();
        if residual <= RESIDUAL_TOLERANCE {
            if dot(&psi, &staggered(h.n_atoms)) < 0.0 {
                psi.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok(GroundState { amplitudes: psi, energy });
        }
        v = psi;
    }
    Err(RydbergError::NoConvergence { residual, iterations: total })
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    (theta, eig.eigenvectors.column(idx).iter().copied().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += c * x);
}

/// `O_Z2 = |(2/N) Σ (-1)^j <n_j>|`, `O_Z3 = |(3/N) Σ e^{2πij/3} <n_j>|`, sites from 1.
pub fn order_parameters(state: &GroundState) -> (f64, f64) {
    order_parameters_from_densities(&state.densities())
}

pub fn order_parameters_from_densities(densities: &[f64]) -> (f64, f64) {
    let n = densities.len() as f64;
    let mut z2 = 0.0;
    // Density summed over each residue class of j mod 3.
    let mut class = [0.0; 3];
    for (idx, &d) in densities.iter().enumerate() {
        let j = idx + 1;
        z2 += if j % 2 == 0 { d } else { -d };
        class[j % 3] += d;
    }
    // |a + b w + c w^2|^2 with w = e^{2πi/3}, free of trig rounding.
    let [a, b, c] = class;
    let z3 = (a * a + b * b + c * c - a * b - b * c - c * a).max(0.0).sqrt();
    ((2.0 / n * z2).abs(), 3.0 / n * z3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Disordered,
    Z2,
    Z3,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Disordered, Phase::Z2, Phase::Z3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Disordered => "disordered",
            Phase::Z2 => "z2",
            Phase::Z3 => "z3",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = RydbergError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| RydbergError::InvalidArgument(format!("unknown phase {s:?}")))
    }
}

pub fn assign_phase(o_z2: f64, o_z3: f64) -> Phase {
    if o_z2 > o_z3 && o_z2 > ORDER_THRESHOLD {
        Phase::Z2
    } else if o_z3 > o_z2 && o_z3 > ORDER_THRESHOLD {
        Phase::Z3
    } else {
        Phase::Disordered
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub delta_over_omega: f64,
    pub r0_over_a: f64,
    pub o_z2: f64,
    pub o_z3: f64,
    pub label: Phase,
}

pub fn solve_point(n_atoms: usize, delta_over_omega: f64, r0_over_a: f64) -> Result<PhaseSample, RydbergError> {
    let h = build_hamiltonian(&RydbergParams::new(n_atoms, delta_over_omega, r0_over_a))?;
    let state = ground_state(&h)?;
    let (o_z2, o_z3) = order_parameters(&state);
    Ok(PhaseSample { delta_over_omega, r0_over_a, o_z2, o_z3, label: assign_phase(o_z2, o_z3) })
}

/// One sample per grid point, in grid order. ED is deterministic; `seed`
/// is accepted for interface symmetry and does not change the result.
pub fn generate_dataset(grid: &[(f64, f64)], n_atoms: usize, _seed: u64) -> Result<Vec<PhaseSample>, RydbergError> {
    if n_atoms > MATRIX_FREE_MAX_ATOMS {
        return Err(RydbergError::Capacity { n: n_atoms, limit: MATRIX_FREE_MAX_ATOMS, path: "matrix-free" });
    }
    grid.par_iter().map(|&(d, r)| solve_point(n_atoms, d, r)).collect()
}

pub const BUILTIN_DELTA: (f64, f64, usize) = (-2.0, 4.0, 31);
pub const BUILTIN_R0: (f64, f64, usize) = (1.0, 3.0, 21);

/// 31 x 21 points over Δ/Ω ∈ [-2, 4], R0/a ∈ [1, 3], Δ varying fastest.
pub fn builtin_grid() -> Vec<(f64, f64)> {
    let axis = |(lo, hi, n): (f64, f64, usize)| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let deltas = axis(BUILTIN_DELTA);
    axis(BUILTIN_R0).into_iter().flat_map(|r| deltas.iter().map(move |&d| (d, r))).collect()
}

/// Two numbers per line, comma or whitespace separated: `delta_over_omega r0_over_a`.
/// Blank lines and `#` comments are skipped.
pub fn parse_grid<R: BufRead>(reader: R) -> Result<Vec<(f64, f64)>, RydbergError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let bad = |reason: String| RydbergError::Grid { line: i + 1, reason };
        if fields.len() != 2 {
            return Err(bad(format!("expected 2 fields, got {}", fields.len())));
        }
        let parse = |f: &str| f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}")));
        out.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(out)
}

pub fn load_grid(spec: &str) -> Result<Vec<(f64, f64)>, RydbergError> {
    if spec == "builtin" {
        return Ok(builtin_grid());
    }
    let file = std::fs::File::open(spec)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{spec}: {e}")))?;
    parse_grid(std::io::BufReader::new(file))
}

pub fn write_jsonl<W: Write>(samples: &[PhaseSample], mut out: W) -> Result<(), RydbergError> {
    for s in samples {
        serde_json::to_writer(&mut out, s).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<PhaseSample>, RydbergError> {
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| RydbergError::Grid { line: i + 1, reason: format!("{}: {e}", path.display()) })?,
        );
    }
    Ok(out)
}
