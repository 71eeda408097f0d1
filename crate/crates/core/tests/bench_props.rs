mod common;

use common::{quick_config, toy_phase_dataset};
use luqpi::bench::*;
use luqpi::rydberg::{Phase, PhaseSample};
use luqpi::svm::KernelKind;
use proptest::prelude::*;

#[test]
fn hard_boundary_draws_sit_nearer_the_threshold() {
    let data = toy_phase_dataset();
    let distance = |kind: StrategyKind| {
        let strategy = SamplingStrategy::preset(kind);
        let mut total = 0.0;
        let mut count = 0usize;
        for draw in 0..100 {
            let idx = sample_training_set(&data, &strategy, 20, &mut stream(1, 9, draw)).unwrap();
            for i in idx {
                total += (data[i].o_z2.max(data[i].o_z3) - 0.8).abs();
                count += 1;
            }
        }
        total / count as f64
    };
    assert!(distance(StrategyKind::HardBoundary) < distance(StrategyKind::Uniform));
}

fn anchor() -> TrainingSet {
    let data = toy_phase_dataset();
    let idx = sample_training_set(&data, &SamplingStrategy::preset(StrategyKind::Uniform), 40, &mut stream(2, 1, 0)).unwrap();
    TrainingSet::gather(&data, &PrivilegedView::new(&data), &idx)
}

#[test]
fn singleton_grid_is_returned() {
    let grid = vec![Hyper { kernel: KernelKind::Rbf, c: 3.0, gamma: 0.5, c_star: None, gamma_star: None }];
    let out = cv_select(&anchor(), Method::Svm, &grid, 3, &quick_config().settings(), &mut stream(2, 2, 0)).unwrap();
    assert_eq!(out.chosen, grid[0]);
    assert_eq!(out.evaluated, 1);
}

#[test]
fn dominated_configuration_loses() {
    // gamma = 1e4 memorises the folds and predicts one class elsewhere.
    let svm = SvmGrid { c: vec![10.0], gamma: vec![1.0, 1e4], kernels: vec![KernelKind::Rbf] };
    let grid = configurations(Method::Svm, &svm, &PrivilegedGrid::default());
    let out = cv_select(&anchor(), Method::Svm, &grid, 3, &quick_config().settings(), &mut stream(2, 2, 0)).unwrap();
    assert_eq!(out.chosen.gamma, 1.0);
}

#[test]
fn svm_rows_ignore_privileged_columns_under_uniform_sampling() {
    let data = toy_phase_dataset();
    let mut shuffled = data.clone();
    let n = shuffled.len();
    for i in 0..n {
        let j = (i * 7919 + 13) % n;
        let (a2, a3) = (shuffled[i].o_z2, shuffled[i].o_z3);
        shuffled[i].o_z2 = shuffled[j].o_z2;
        shuffled[i].o_z3 = shuffled[j].o_z3;
        shuffled[j].o_z2 = a2;
        shuffled[j].o_z3 = a3;
    }
    let cfg = ExperimentConfig { strategies: vec![StrategyKind::Uniform], repeats: 2, ..quick_config() };
    let svm_rows = |d: &[PhaseSample]| {
        run_experiment(&cfg, d).unwrap().rows.into_iter().filter(|r| r.method == Method::Svm).collect::<Vec<_>>()
    };
    assert_eq!(svm_rows(&data), svm_rows(&shuffled));
}

#[test]
fn experiment_reports_are_consistent() {
    let data = toy_phase_dataset();
    let cfg = quick_config();
    let out = run_experiment(&cfg, &data).unwrap();
    assert_eq!(out.firewall.evaluation_reads, 0);
    assert!(out.firewall.training_reads > 0);
    assert_eq!(out.rows.len(), 2 * cfg.strategies.len() * cfg.train_sizes.len() * cfg.repeats);
    for cell in &out.cells {
        let acc: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| r.method == cell.method && r.strategy == cell.strategy && r.train_size == cell.train_size)
            .map(|r| r.accuracy)
            .collect();
        assert_eq!(acc.len(), cfg.repeats);
        let mean = acc.iter().sum::<f64>() / acc.len() as f64;
        assert!((cell.accuracy.mean - mean).abs() < 1e-12);
        assert!(cell.accuracy.ci_low.unwrap() <= mean && mean <= cell.accuracy.ci_high.unwrap());
    }
    let small = out.cells.iter().find(|c| c.method == Method::Svm && c.strategy == StrategyKind::Uniform && c.train_size == 15);
    let large = out.cells.iter().find(|c| c.method == Method::Svm && c.strategy == StrategyKind::Uniform && c.train_size == 40);
    assert!(large.unwrap().accuracy.mean >= small.unwrap().accuracy.mean);
    assert_eq!(out, run_experiment(&cfg, &data).unwrap());
}

#[test]
fn single_repeat_gives_one_row_per_method() {
    let cfg = ExperimentConfig { repeats: 1, train_sizes: vec![20], strategies: vec![StrategyKind::LightBoundary], ..quick_config() };
    let out = run_experiment(&cfg, &toy_phase_dataset()).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert_eq!(out.rows[0].method, Method::Svm);
    assert_eq!(out.rows[1].method, Method::Svmplus);
    assert!(out.cells.iter().all(|c| c.accuracy.n == 1 && c.accuracy.ci_low.is_none()));

    let mut buf = Vec::new();
    write_csv(&out.rows[..1], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "method,strategy,train_size,repeat,accuracy,C,gamma,Cstar,gammastar,kernel");
}

#[test]
fn report_files_land_in_the_output_directory() {
    let cfg = ExperimentConfig { repeats: 2, train_sizes: vec![15], ..quick_config() };
    let out = run_experiment(&cfg, &toy_phase_dataset()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&out, dir.path()).unwrap();
    assert!(paths.csv.exists() && paths.summary.exists());
    assert_eq!(paths.plots.len(), cfg.strategies.len());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths.summary).unwrap()).unwrap();
    assert_eq!(summary["firewall"]["evaluation_reads"], 0);
}

#[test]
fn disjoint_evaluation_uses_held_out_points() {
    let cfg = ExperimentConfig { repeats: 2, train_sizes: vec![15], disjoint_evaluation: true, ..quick_config() };
    let out = run_experiment(&cfg, &toy_phase_dataset()).unwrap();
    assert!(out.rows.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
}

#[test]
fn missing_class_reports_the_class() {
    let data: Vec<PhaseSample> = toy_phase_dataset().into_iter().filter(|s| s.label != Phase::Z3).collect();
    let err = run_experiment(&quick_config(), &data).unwrap_err();
    assert!(err.to_string().contains("z3"), "{err}");
}

fn labels_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..3, 6..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_sum_to_size(a in 0.0f64..1.0, b in 0.0f64..1.0, size in 0usize..500) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let ratio = [lo, hi - lo, 1.0 - hi];
        let counts = class_counts(&ratio, size);
        prop_assert_eq!(counts.iter().sum::<usize>(), size);
        for k in 0..3 {
            prop_assert!(counts[k] as f64 >= (ratio[k] * size as f64).floor() - 1e-9);
        }
    }

    #[test]
    fn folds_partition_each_class(labels in labels_strategy(), folds in 2usize..5, seed in any::<u64>()) {
        let mut per = [0usize; 3];
        labels.iter().for_each(|&l| per[l] += 1);
        match stratified_folds(&labels, folds, &mut stream(seed, 0, 0)) {
            Ok(assign) => {
                prop_assert_eq!(assign.len(), labels.len());
                for class in 0..3 {
                    let mut sizes = vec![0usize; folds];
                    for (i, &f) in assign.iter().enumerate() {
                        prop_assert!(f < folds);
                        if labels[i] == class {
                            sizes[f] += 1;
                        }
                    }
                    let (mn, mx) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                    prop_assert!(mx - mn <= 1);
                }
            }
            Err(BenchError::Stratification(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn draws_are_distinct_and_match_the_ratio(size in 6usize..80, weight in 0.0f64..8.0, seed in any::<u64>()) {
        let data = toy_phase_dataset();
        let strategy = SamplingStrategy { kind: StrategyKind::HardBoundary, boundary_weight: weight, class_ratio: DEFAULT_CLASS_RATIO };
        let idx = sample_training_set(&data, &strategy, size, &mut stream(seed, 4, 0)).unwrap();
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let mut counts = [0usize; 3];
        idx.iter().for_each(|&i| counts[data[i].label.index()] += 1);
        prop_assert_eq!(counts, class_counts(&DEFAULT_CLASS_RATIO, size));
    }

    #[test]
    fn interval_contains_the_mean(values in prop::collection::vec(0.0f64..1.0, 2..40)) {
        let iv = mean_ci(&values);
        prop_assert!(iv.ci_low.unwrap() <= iv.mean + 1e-12 && iv.mean <= iv.ci_high.unwrap() + 1e-12);
    }
}
