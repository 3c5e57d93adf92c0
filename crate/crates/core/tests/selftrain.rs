use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gdalab::datasets::{draw_scaled, make_rotation_path, Domain, DomainPath, Generator, Label, LabeledSample};
use gdalab::harness::{verify_inequalities, ExperimentConfig, PathKind, SeedList};
use gdalab::model::{population_error, Metric};
use gdalab::selftrain::{gradual_self_train, self_train_step, GradualSelfTrainer, StepOptions};

fn moons() -> Generator {
    Generator::TwoMoons { noise_sigma: 0.1 }
}

fn scramble(path: &DomainPath, seed: u64) -> DomainPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domains = path
        .domains()
        .iter()
        .enumerate()
        .map(|(t, d)| {
            if t == 0 {
                return d.clone();
            }
            let s: Vec<LabeledSample> = d
                .evaluation_samples()
                .iter()
                .map(|s| LabeledSample::new(s.x.clone(), if rng.gen() { Label::Pos } else { Label::Neg }))
                .collect();
            Domain::new(s, d.descriptor.clone()).unwrap()
        })
        .collect();
    DomainPath::new(domains, path.n_per_domain(), path.normalization_scale()).unwrap()
}

#[test]
fn scrambled_evaluation_labels_do_not_change_the_result() {
    let cfg = ExperimentConfig::default();
    for seed in 0..3 {
        let data = gdalab::harness::prepare_trial(&cfg, PathKind::Rotation, 6, 40, seed).unwrap();
        let scrambled = scramble(&data.path, seed);
        assert_ne!(
            scrambled.target().evaluation_samples(),
            data.path.target().evaluation_samples()
        );
        let (a, ta) = gradual_self_train(&data.h0, &data.path, &cfg.loss, &data.st_train, true).unwrap();
        let (b, tb) = gradual_self_train(&data.h0, &scrambled, &cfg.loss, &data.st_train, true).unwrap();
        assert_eq!(a, b);
        let agree = |t: &gdalab::selftrain::AdaptationTrace| t.records.iter().map(|r| r.pseudo_agreement).collect::<Vec<_>>();
        assert_eq!(agree(&ta), agree(&tb));
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn identical_path_accuracy(weight_decay: f64) -> (f64, f64) {
    // every domain is a fresh draw from the unrotated source distribution
    let mut cfg = ExperimentConfig::default();
    cfg.path.end_deg = 0.0;
    cfg.sweep.n_eval = 1000;
    cfg.train.weight_decay = weight_decay;
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let data = gdalab::harness::prepare_trial(&cfg, PathKind::Rotation, 5, 50, seed).unwrap();
        let (ht, trace) = gradual_self_train(&data.h0, &data.path, &cfg.loss, &data.st_train, true).unwrap();
        assert_eq!(trace.len(), 5);
        before.push(1.0 - population_error(&data.h0, &data.target_test, &Metric::ZeroOne).unwrap());
        after.push(1.0 - population_error(&ht, &data.target_test, &Metric::ZeroOne).unwrap());
    }
    (mean(&before), mean(&after))
}

#[test]
fn identical_domains_keep_accuracy() {
    let (b, a) = identical_path_accuracy(0.0);
    assert!((a - b).abs() <= 0.02, "h0 {b:.4}, h_T {a:.4}");
}

#[test]
fn weight_decay_erodes_accuracy_on_identical_domains() {
    // the benchmark's per-step shrinkage costs accuracy even without any shift
    let (b, a) = identical_path_accuracy(ExperimentConfig::default().train.weight_decay);
    assert!(b - a > 0.05, "h0 {b:.4}, h_T {a:.4}");
}

#[test]
fn one_step_on_the_source_distribution_keeps_accuracy() {
    let cfg = ExperimentConfig::default();
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let path = make_rotation_path(&moons(), 0.0, 0.0, 1, 50, 1000 + seed).unwrap();
        let init = cfg.model.init(2, seed).unwrap();
        let src_cfg = gdalab::model::TrainConfig { seed, ..cfg.source_train };
        let h0 = gdalab::selftrain::fit_source(&init, path.source(), &cfg.loss, &src_cfg).unwrap();
        let test = draw_scaled(&moons(), 1000, path.normalization_scale(), 2000 + seed).unwrap();
        let st_cfg = gdalab::model::TrainConfig { seed, ..cfg.train };
        let h1 = self_train_step(&h0, path.target().unlabeled(), &cfg.loss, &st_cfg, &StepOptions::default())
            .unwrap()
            .classifier;
        before.push(1.0 - population_error(&h0, test.evaluation_samples(), &Metric::ZeroOne).unwrap());
        after.push(1.0 - population_error(&h1, test.evaluation_samples(), &Metric::ZeroOne).unwrap());
    }
    let (b, a) = (mean(&before), mean(&after));
    assert!((a - b).abs() <= 0.02, "h {b:.4}, h' {a:.4}");
}

#[test]
fn held_out_trace_matches_manual_scoring() {
    let cfg = ExperimentConfig::default();
    let data = gdalab::harness::prepare_trial(&cfg, PathKind::Rotation, 4, 30, 1).unwrap();
    let sets: Vec<Vec<LabeledSample>> = (0..=4)
        .map(|t| data.step_test_set(&cfg, PathKind::Rotation, t).unwrap())
        .collect();
    let mut runner = GradualSelfTrainer::new(cfg.loss, data.st_train);
    runner.eval_sets = Some(&sets);
    let (ht, trace) = runner.run(&data.h0, &data.path).unwrap();
    let last = trace.records.last().unwrap();
    assert_eq!(last.t, 4);
    assert_eq!(last.eval_zero_one, population_error(&ht, &sets[4], &Metric::ZeroOne).unwrap());
    assert!(trace.records.windows(2).all(|w| w[0].t < w[1].t));
    assert!(runner.eval_sets.is_some());
    let short = &sets[..3];
    runner.eval_sets = Some(short);
    assert!(runner.run(&data.h0, &data.path).is_err());
}

#[test]
fn stability_and_growth_on_the_rotation_benchmark() {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 7;
    cfg.sweep.seeds = SeedList::Count(20);
    cfg.verify.lemma_trials = 0;
    cfg.verify.identical_trials = 0;
    cfg.verify.disc_trials = 0;
    let report = verify_inequalities(&cfg, 0).unwrap();
    let stab = report.battery("stability").unwrap();
    assert_eq!(stab.trials, 20 * 20);
    assert!(stab.pass_rate() >= 0.95, "{stab:?}");
    let growth = report.battery("growth").unwrap();
    assert!(growth.pass_rate() >= 0.8, "{growth:?}");
}
