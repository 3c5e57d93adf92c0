use gdalab::datasets::{Label, LabeledSample};
use gdalab::model::{
    grad_check, lipschitz_upper_bound, population_error, train_erm, Activation, Classifier, Example, LossSpec, Metric,
    Optimizer, Target, TrainConfig,
};
use gdalab::seeding::stream;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_batch(dim: usize, n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = stream(seed, &[]);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = if rng.gen::<bool>() { Label::Pos } else { Label::Neg };
            LabeledSample::new(x, y)
        })
        .collect()
}

fn all_losses() -> [LossSpec; 4] {
    [LossSpec::logistic(), LossSpec::hinge(), LossSpec::ramp(), LossSpec::squared()]
}

#[test]
fn finite_differences_agree_for_every_loss_and_model() {
    let batch = random_batch(3, 24, 1);
    let ex: Vec<_> = batch.iter().map(Example::from_sample).collect();
    let models = [
        Classifier::init_linear(3, 2).unwrap(),
        Classifier::init_mlp(3, &[8, 8], Activation::Relu, 3).unwrap(),
        Classifier::init_mlp(3, &[6], Activation::Tanh, 4).unwrap(),
    ];
    for h in &models {
        for loss in all_losses() {
            let r = grad_check(h, &loss, &ex, 1e-5);
            assert!(r.used > 0, "{loss:?}: every probe excluded");
            assert!(r.max_rel_error < 1e-4, "{loss:?} {h:?}: {}", r.max_rel_error);
        }
    }
}

#[test]
fn flat_ramp_region_has_zero_gradients() {
    let h = Classifier::linear(vec![2.0, 0.0], 3.0).unwrap();
    let batch = vec![
        LabeledSample::new(vec![0.5, 0.1], Label::Pos),
        LabeledSample::new(vec![-0.2, 0.4], Label::Pos),
    ];
    let ex: Vec<_> = batch.iter().map(Example::from_sample).collect();
    let r = grad_check(&h, &LossSpec::ramp(), &ex, 1e-5);
    assert_eq!(r.used, 2);
    assert!(r.analytic.iter().all(|&g| g == 0.0));
    assert!(r.numeric.iter().all(|&g| g == 0.0));
}

#[test]
fn squared_loss_linear_gradient_matches_closed_form() {
    let h = Classifier::linear(vec![0.3, -0.2], 0.1).unwrap();
    let batch = random_batch(2, 10, 7);
    let ex: Vec<_> = batch.iter().map(Example::from_sample).collect();
    let r = grad_check(&h, &LossSpec::squared(), &ex, 1e-5);
    assert_eq!(r.used, 10);
    let mut expect = [0.0; 3];
    for s in &batch {
        let score = 0.3 * s.x[0] - 0.2 * s.x[1] + 0.1;
        let g = 2.0 * (score - s.y.value()) / 10.0;
        expect[0] += g * s.x[0];
        expect[1] += g * s.x[1];
        expect[2] += g;
    }
    for (a, e) in r.analytic.iter().zip(expect) {
        assert!((a - e).abs() < 1e-10);
    }
}

#[test]
fn lipschitz_bound_dominates_exact_svd() {
    for seed in 0..5 {
        let h = Classifier::init_mlp(4, &[16, 9], Activation::Relu, seed).unwrap();
        let Classifier::Mlp { layers, .. } = &h else { unreachable!() };
        let exact: f64 = layers
            .iter()
            .map(|l| {
                let m = DMatrix::from_row_slice(l.out, l.inp, &l.weights);
                m.singular_values().max()
            })
            .product();
        let r = lipschitz_upper_bound(&h);
        assert!(r >= exact, "{r} < {exact}");
        assert!((r - exact) / exact < 1e-5, "{r} vs {exact}");
    }
}

#[test]
fn sampled_slopes_never_exceed_bound() {
    let h = Classifier::init_mlp(2, &[32, 32], Activation::Relu, 21).unwrap();
    let r = lipschitz_upper_bound(&h);
    let mut rng = stream(99, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let a: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let b: [f64; 2] = [a[0] + rng.gen_range(-0.1..0.1), a[1] + rng.gen_range(-0.1..0.1)];
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if d > 0.0 {
            worst = worst.max((h.score(&a).unwrap() - h.score(&b).unwrap()).abs() / d);
        }
    }
    assert!(worst <= r, "{worst} > {r}");
}

#[test]
fn random_labels_give_chance_error() {
    let batch = random_batch(2, 4000, 5);
    let h = Classifier::init_default(2, 6).unwrap();
    let e = population_error(&h, &batch, &Metric::ZeroOne).unwrap();
    assert!((e - 0.5).abs() < 0.05, "{e}");
}

#[test]
fn soft_targets_fit_with_squared_loss() {
    let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0]).collect();
    let ex: Vec<_> = xs
        .iter()
        .map(|x| Example {
            x,
            target: Target::Soft(0.5 * x[0] - 0.1),
        })
        .collect();
    let cfg = TrainConfig {
        optimizer: Optimizer::Sgd,
        lr: 0.5,
        epochs: 400,
        batch_size: 20,
        ..Default::default()
    };
    let out = train_erm(&Classifier::linear(vec![0.0], 0.0).unwrap(), &ex, &LossSpec::squared(), &cfg).unwrap();
    let Classifier::Linear { w, b } = out.classifier else { unreachable!() };
    assert!((w[0] - 0.5).abs() < 1e-3 && (b + 0.1).abs() < 1e-3, "{w:?} {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Full-batch gradient descent on a convex loss with a linear model and
    // lr below 1 / smoothness never ends above where it started.
    #[test]
    fn convex_linear_training_does_not_increase_loss(seed in 0u64..1000, k in 0usize..3) {
        let loss = [LossSpec::logistic(), LossSpec::hinge(), LossSpec::squared()][k];
        let batch = random_batch(3, 30, seed);
        let ex: Vec<_> = batch.iter().map(Example::from_sample).collect();
        let init = Classifier::init_linear(3, seed + 1).unwrap();
        let cfg = TrainConfig { optimizer: Optimizer::Sgd, lr: 0.05, epochs: 30, batch_size: 30, seed, ..Default::default() };
        let out = train_erm(&init, &ex, &loss, &cfg).unwrap();
        prop_assert!(out.final_loss() <= out.initial_loss + 1e-12);
    }

    #[test]
    fn training_is_deterministic(seed in 0u64..1000) {
        let batch = random_batch(2, 25, seed);
        let ex: Vec<_> = batch.iter().map(Example::from_sample).collect();
        let init = Classifier::init_mlp(2, &[8], Activation::Tanh, seed).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 4, seed, ..Default::default() };
        let a = train_erm(&init, &ex, &LossSpec::logistic(), &cfg).unwrap();
        let b = train_erm(&init, &ex, &LossSpec::logistic(), &cfg).unwrap();
        let bits = |h: &Classifier| h.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.classifier), bits(&b.classifier));
    }
}
