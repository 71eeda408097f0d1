//! Reference solvers shared by the integration tests. Nothing here calls the
//! library's optimizers.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rbf_gram(xs: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = xs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            k[i * n + j] = (-gamma * d2).exp();
        }
    }
    k
}

/// Random labelled cloud with both labels present and privileged copies.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let ys: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        if !(ys.contains(&1.0) && ys.contains(&-1.0)) {
            continue;
        }
        let xs: Vec<Vec<f64>> =
            ys.iter().map(|y| (0..dim).map(|_| 0.6 * y + rng.gen_range(-1.0..1.0)).collect()).collect();
        let star: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] + rng.gen_range(-0.3..0.3), rng.gen_range(-1.0..1.0)]).collect();
        return (xs, star, ys);
    }
}

pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// `max p'x - x'Qx/2` subject to `A x = b`, `0 <= x <= upper` (upper may be
/// infinite), by enumerating which variables sit at 0, strictly inside, or at
/// the upper bound and keeping the best KKT-consistent candidate.
pub fn brute_force_qp(q: &DMatrix<f64>, p: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, upper: &[f64]) -> QpSolution {
    let n = p.len();
    let states: Vec<u8> = (0..n).map(|i| if upper[i].is_finite() { 3 } else { 2 }).collect();
    let mut code = vec![0u8; n];
    let mut best: Option<QpSolution> = None;
    let scale = 1.0 + upper.iter().filter(|u| u.is_finite()).fold(0.0f64, |m, &u| m.max(u));
    let tol = 1e-9 * scale;
    loop {
        if let Some(cand) = solve_face(q, p, a, b, upper, &code, tol) {
            if best.as_ref().is_none_or(|s| cand.objective > s.objective) {
                best = Some(cand);
            }
        }
        // Next state vector in mixed radix.
        let mut i = 0;
        loop {
            if i == n {
                return best.expect("feasible problem has a KKT point");
            }
            code[i] += 1;
            if code[i] < states[i] {
                break;
            }
            code[i] = 0;
            i += 1;
        }
    }
}

/// Face `code`: 0 at zero, 1 free, 2 at the upper bound.
fn solve_face(
    q: &DMatrix<f64>,
    p: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    upper: &[f64],
    code: &[u8],
    tol: f64,
) -> Option<QpSolution> {
    let n = p.len();
    let m = a.nrows();
    let free: Vec<usize> = (0..n).filter(|&i| code[i] == 1).collect();
    let mut x = DVector::from_fn(n, |i, _| if code[i] == 2 { upper[i] } else { 0.0 });
    let f = free.len();
    // Stationarity on free variables: Q_FF x_F + A_F' lam = p_F - Q_FB x_B;
    // feasibility: A_F x_F = b - A_B x_B.
    let mut sys = DMatrix::zeros(f + m, f + m);
    let mut rhs = DVector::zeros(f + m);
    let qx = q * &x;
    let ax = a * &x;
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            sys[(r, s)] = q[(i, j)];
        }
        for k in 0..m {
            sys[(r, f + k)] = a[(k, i)];
            sys[(f + k, r)] = a[(k, i)];
        }
        rhs[r] = p[i] - qx[i];
    }
    for k in 0..m {
        rhs[f + k] = b[k] - ax[k];
    }
    let svd = sys.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-12).ok()?;
    if (&sys * &sol - &rhs).amax() > 1e-8 * (1.0 + rhs.amax()) {
        return None;
    }
    for (r, &i) in free.iter().enumerate() {
        x[i] = sol[r];
        if x[i] < -tol || x[i] > upper[i] + tol {
            return None;
        }
    }
    if (a * &x - b).amax() > 1e-8 * (1.0 + b.amax()) {
        return None;
    }
    let lam = sol.rows(f, m).into_owned();
    // Reduced gradient p - Qx - A'lam: <= 0 at zero, >= 0 at the upper bound.
    let reduced = p - q * &x - a.transpose() * &lam;
    for i in 0..n {
        match code[i] {
            0 if reduced[i] > tol => return None,
            2 if reduced[i] < -tol => return None,
            _ => {}
        }
    }
    let objective = p.dot(&x) - 0.5 * x.dot(&(q * &x));
    Some(QpSolution { x: x.iter().copied().collect(), objective })
}

/// Soft-margin SVM dual as a box QP.
pub fn svm_oracle(k: &[f64], ys: &[f64], c: f64) -> QpSolution {
    let n = ys.len();
    let q = DMatrix::from_fn(n, n, |i, j| ys[i] * ys[j] * k[i * n + j]);
    let p = DVector::from_element(n, 1.0);
    let a = DMatrix::from_fn(1, n, |_, j| ys[j]);
    let b = DVector::zeros(1);
    brute_force_qp(&q, &p, &a, &b, &vec![c; n])
}

/// SVM+ dual over `(alpha, beta)`; returns the stacked vector and the dual
/// value including the constant term.
pub fn svmplus_oracle(k: &[f64], ks: &[f64], ys: &[f64], c: f64, c_star: f64) -> QpSolution {
    let n = ys.len();
    let q = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (ii, jj) = (i % n, j % n);
        let star = ks[ii * n + jj] / c_star;
        if i < n && j < n {
            ys[ii] * ys[jj] * k[ii * n + jj] + star
        } else {
            star
        }
    });
    let row_sum: Vec<f64> = (0..n).map(|i| (0..n).map(|j| ks[i * n + j]).sum()).collect();
    let p = DVector::from_fn(2 * n, |i, _| (if i < n { 1.0 } else { 0.0 }) + c / c_star * row_sum[i % n]);
    let a = DMatrix::from_fn(2, 2 * n, |r, j| if r == 0 { if j < n { ys[j] } else { 0.0 } } else { 1.0 });
    let b = DVector::from_vec(vec![0.0, n as f64 * c]);
    let mut sol = brute_force_qp(&q, &p, &a, &b, &vec![f64::INFINITY; 2 * n]);
    let constant: f64 = row_sum.iter().sum::<f64>() * c * c / (2.0 * c_star);
    sol.objective -= constant;
    sol
}

/// Synthetic phase diagram on a 25 x 20 grid: order rises with detuning, the
/// period switches from 2 to 3 at `r = 2`.
pub fn toy_phase_dataset() -> Vec<luqpi::rydberg::PhaseSample> {
    let mut out = Vec::new();
    for i in 0..25 {
        for j in 0..20 {
            let d = -2.0 + 6.0 * i as f64 / 24.0;
            let r = 1.0 + 2.0 * j as f64 / 19.0;
            let order = 1.0 / (1.0 + (-(d - 1.0) * 2.0).exp());
            let (o_z2, o_z3) = if r < 2.0 { (order, 0.1 * order) } else { (0.1 * order, order) };
            let label = luqpi::rydberg::assign_phase(o_z2, o_z3);
            out.push(luqpi::rydberg::PhaseSample { delta_over_omega: d, r0_over_a: r, o_z2, o_z3, label });
        }
    }
    out
}

/// Small grids so a full experiment finishes in seconds.
pub fn quick_config() -> luqpi::bench::ExperimentConfig {
    use luqpi::bench::*;
    use luqpi::svm::KernelKind;
    ExperimentConfig {
        train_sizes: vec![15, 40],
        repeats: 4,
        cv_folds: 3,
        anchor_size: 30,
        strategies: vec![StrategyKind::Uniform, StrategyKind::HardBoundary],
        svm: SvmGrid { c: vec![1.0, 100.0], gamma: vec![0.1, 1.0], kernels: vec![KernelKind::Rbf] },
        svmplus: PrivilegedGrid { c_star: vec![1.0, 100.0], gamma_star: vec![0.1] },
        seed: 5,
        ..ExperimentConfig::default()
    }
}

/// Runs every subcommand twice with fixed seeds under `root` and returns the
/// commands whose output files differ between the runs.
pub fn cli_nondeterminism(root: &std::path::Path) -> Vec<String> {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_luqpi");
    std::fs::create_dir_all(root).unwrap();
    let grid = root.join("grid.txt");
    std::fs::write(&grid, "# delta r0\n-1.0 1.2\n0.5, 1.8\n2.5 1.2\n3.0 2.4\n").unwrap();
    let dataset = root.join("toy.jsonl");
    let mut f = std::fs::File::create(&dataset).unwrap();
    luqpi::rydberg::write_jsonl(&toy_phase_dataset(), &mut f).unwrap();
    let config = root.join("quick.json");
    std::fs::write(&config, serde_json::to_string(&quick_config()).unwrap()).unwrap();

    let cases: Vec<(&str, Vec<String>)> = vec![
        ("gen-group", vec!["gen-group".into(), "--n".into(), "10".into()]),
        ("eek-demo", vec!["eek-demo".into(), "--n".into(), "8".into(), "--seed".into(), "4".into(), "--reveal-key".into()]),
        ("luqpi-run eek", "luqpi-run --task eek --n 8 --trials 4 --seed 2 --test-size 200".split(' ').map(String::from).collect()),
        ("luqpi-run beek", "luqpi-run --task beek --n 6 --trials 4 --seed 2 --test-size 200".split(' ').map(String::from).collect()),
        ("dcr-demo", "dcr-demo --bits 12 --labeled 2 --featured 4 --seed 9".split(' ').map(String::from).collect()),
        (
            "rydberg-gen",
            vec!["rydberg-gen".into(), "--atoms".into(), "7".into(), "--grid".into(), grid.display().to_string(), "--seed".into(), "1".into()],
        ),
        (
            "benchmark",
            vec![
                "benchmark".into(),
                "--dataset".into(),
                dataset.display().to_string(),
                "--config".into(),
                config.display().to_string(),
                "--seed".into(),
                "3".into(),
            ],
        ),
    ];
    let mut bad = Vec::new();
    for (name, args) in cases {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let target = root.join(format!("{}-{run}", name.replace(' ', "-")));
            let mut cmd = Command::new(bin);
            cmd.args(&args).arg("--out").arg(&target);
            let status = cmd.output().unwrap();
            assert!(status.status.success(), "{name}: {}", String::from_utf8_lossy(&status.stderr));
            outputs.push(read_tree(&target));
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            bad.push(name.to_string());
        }
    }
    bad
}

fn read_tree(path: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    if path.is_file() {
        return vec![(String::new(), std::fs::read(path).unwrap())];
    }
    let mut out = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(path).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
