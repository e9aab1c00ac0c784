use ddi_core::features::FeatureMatrix;
use ddi_core::learn::{
    analytic_gradient, cross_validate, fit, gradient_check, lambda_grid, lambda_max, numeric_gradient,
    predict_scores, train, GradientBatch, LossKind, TrainConfig,
};
use ddi_core::rng::XorShift64Star;
use ddi_core::synthetic::{planted_corpus, PlantedConfig};
use proptest::prelude::*;

/// Gaussian features with labels drawn from a logistic model, so both
/// classes overlap and the penalized optimum is finite and unique.
fn noisy_fixture(seed: u64, n: usize, d: usize) -> FeatureMatrix {
    let mut rng = XorShift64Star::new(seed);
    let truth: Vec<f64> = (0..d).map(|j| if j < 3 { 1.5 } else { 0.0 }).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let z: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let p = 1.0 / (1.0 + (-z).exp());
        // keep both classes present
        let y = if i == 0 { 0 } else if i == 1 { 1 } else { u8::from(rng.unit_f64() < p) };
        rows.push(x);
        labels.push(y);
    }
    FeatureMatrix::from_dense(rows, labels).unwrap()
}

fn logistic(lambda: f64) -> TrainConfig {
    TrainConfig {
        loss: LossKind::Logistic,
        l1_lambda: lambda,
        tolerance: 1e-12,
        max_iters: 100_000,
        ..TrainConfig::default()
    }
}

fn random_batch(rng: &mut XorShift64Star, scale: f64) -> GradientBatch {
    let n = 1 + rng.index(20);
    let d = 1 + rng.index(8);
    GradientBatch {
        rows: (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect(),
        labels: (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect(),
        weights: (0..d).map(|_| scale * rng.normal()).collect(),
        bias: rng.normal(),
    }
}

#[test]
fn logistic_gradient_matches_central_differences() {
    let mut rng = XorShift64Star::new(11);
    for _ in 0..200 {
        let batch = random_batch(&mut rng, 1.0);
        let err = gradient_check(LossKind::Logistic, &batch);
        assert!(err < 1e-6, "relative error {err}");
    }
}

#[test]
fn balanced_labels_at_zero_give_zero_bias_gradient() {
    let batch = GradientBatch {
        rows: vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 1.0], vec![4.0, -1.0]],
        labels: vec![1, 0, 1, 0],
        weights: vec![0.0, 0.0],
        bias: 0.0,
    };
    let g = analytic_gradient(LossKind::Logistic, &batch);
    assert_eq!(*g.last().unwrap(), 0.0);
    // each weight gradient is -mean(x * (y - 1/2))
    assert_eq!(g[0], -(0.5 * 1.0 - 0.5 * -3.0 + 0.5 * 0.0 - 0.5 * 4.0) / 4.0);
}

#[test]
fn hinge_gradient_vanishes_beyond_margin() {
    let batch = GradientBatch {
        rows: vec![vec![2.0, 0.0], vec![-2.0, 1.0]],
        labels: vec![1, 0],
        weights: vec![1.0, 0.0],
        bias: 0.0,
    };
    let a = analytic_gradient(LossKind::Hinge, &batch);
    let n = numeric_gradient(LossKind::Hinge, &batch, 1e-5);
    assert!(a.iter().all(|v| *v == 0.0));
    assert!(n.iter().all(|v| *v == 0.0));
}

#[test]
fn l1_norm_shrinks_along_the_path() {
    let m = noisy_fixture(3, 150, 8);
    let grid = lambda_grid(&m, 15, 1e-3, false).unwrap();
    let mut prev = 0.0;
    for &l in &grid {
        let model = train(&m, &logistic(l)).unwrap();
        let norm = model.l1_norm();
        assert!(norm >= prev - 1e-7, "norm {norm} fell below {prev} at lambda {l}");
        prev = norm;
    }
    assert!(prev > 0.0);
}

#[test]
fn objective_trace_never_rises() {
    for seed in 0..5 {
        let m = noisy_fixture(seed, 120, 10);
        let lmax = lambda_max(&m, false).unwrap();
        for (kind, lambda) in [(LossKind::Logistic, lmax / 10.0), (LossKind::Hinge, 0.01)] {
            let cfg = TrainConfig {
                loss: kind,
                l1_lambda: lambda,
                max_iters: 3000,
                ..TrainConfig::default()
            };
            let f = fit(&m, &cfg, None).unwrap();
            assert!(f.trace.len() >= 2);
            for w in f.trace.windows(2) {
                assert!(w[1] <= w[0], "{kind}: {} then {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn shrinkage_threshold() {
    for seed in 0..5 {
        let m = noisy_fixture(seed, 100, 6);
        let lmax = lambda_max(&m, false).unwrap();
        for l in [lmax, lmax * 1.5] {
            assert_eq!(train(&m, &logistic(l)).unwrap().nonzero(), 0);
        }
        assert!(train(&m, &logistic(lmax / 2.0)).unwrap().nonzero() > 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_are_dot_products(seed in any::<u64>()) {
        let m = noisy_fixture(seed, 40, 5);
        let model = train(&m, &logistic(0.01)).unwrap();
        let scores = predict_scores(&model, &m).unwrap();
        for (i, s) in scores.iter().enumerate() {
            let mut z = model.bias;
            m.for_each_in_row(i, |j, v| z += v * model.weights[j]);
            prop_assert!((s - z).abs() <= 1e-12 * (1.0 + z.abs()));
        }
    }
}

#[test]
fn cv_on_random_labels_is_near_chance() {
    let mut rng = XorShift64Star::new(99);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..10).map(|_| rng.normal()).collect()).collect();
    let labels: Vec<u8> = (0..400).map(|_| u8::from(rng.bernoulli(0.5))).collect();
    let m = FeatureMatrix::from_dense(rows, labels).unwrap();
    let grid = lambda_grid(&m, 8, 1e-2, false).unwrap();
    let cv = cross_validate(&m, &grid, 5, &logistic(0.0), 1).unwrap();
    for a in cv.mean_auc.iter().flatten() {
        assert!((a - 0.5).abs() <= 0.1, "mean AUC {a}");
    }
}

#[test]
fn planted_signal_picks_interior_lambda() {
    use ddi_core::features::{build_vocab, count_matrix, index_abstracts, Stopwords};
    let corpus = planted_corpus(&PlantedConfig {
        n_samples: 600,
        vocab_size: 1500,
        ..PlantedConfig::default()
    });
    let refs: Vec<_> = corpus.abstracts.iter().collect();
    let vocab = build_vocab(&refs, None, &Stopwords::none());
    let index = index_abstracts(&corpus.abstracts);
    let m = count_matrix(&corpus.samples, &index, &vocab).unwrap();
    let grid = lambda_grid(&m, 12, 1e-3, false).unwrap();
    let cfg = TrainConfig {
        loss: LossKind::Logistic,
        ..TrainConfig::default()
    };
    let cv = cross_validate(&m, &grid, 5, &cfg, 0).unwrap();
    assert!(cv.best_lambda < grid[0], "best lambda {} is the largest", cv.best_lambda);
    assert!(cv.best_lambda > *grid.last().unwrap(), "best lambda {} is the smallest", cv.best_lambda);
}
