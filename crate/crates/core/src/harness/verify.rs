use rand::Rng;

use super::config::{ExperimentConfig, PathKind};
use super::par_map;
use super::sweep::prepare_trial;
use crate::datasets::{make_rotation_path, translate_domain, Domain, Generator, ShiftDescriptor};
use crate::error::{invalid, Result};
use crate::model::{lipschitz_upper_bound, population_error, Activation, Classifier, LossSpec, Metric, TrainConfig};
use crate::numfmt::sig17;
use crate::selftrain::{compare_growth, self_train_step};
use crate::seeding::{derive_seed, name_key, normal, stream};
use crate::theory::{disc_estimate, disc_upper_bound, error_diff_bound, hypothesis_bank, BankSpec, WeightVector};
use crate::transport::{exact_wasserstein, path_shift_profile, PointCloud};

/// Outcome of one inequality battery.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryResult {
    pub name: &'static str,
    pub trials: usize,
    pub passed: usize,
    /// Required pass rate; `None` for batteries that are only reported.
    pub threshold: Option<f64>,
    /// Smallest `bound - observed` over all trials (negative on a failure).
    pub worst_slack: f64,
}

impl BatteryResult {
    fn from_slacks(name: &'static str, threshold: Option<f64>, slacks: &[f64]) -> Self {
        Self {
            name,
            trials: slacks.len(),
            passed: slacks.iter().filter(|s| **s >= 0.0).count(),
            threshold,
            worst_slack: slacks.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn pass_rate(&self) -> f64 {
        if self.trials == 0 {
            1.0
        } else {
            self.passed as f64 / self.trials as f64
        }
    }

    pub fn ok(&self) -> bool {
        self.threshold.map_or(true, |th| self.pass_rate() >= th)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub batteries: Vec<BatteryResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.batteries.iter().all(BatteryResult::ok)
    }

    pub fn battery(&self, name: &str) -> Option<&BatteryResult> {
        self.batteries.iter().find(|b| b.name == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["battery", "trials", "passed", "pass_rate", "threshold", "worst_slack", "status"])?;
        for b in &self.batteries {
            let status = match (b.threshold, b.ok()) {
                (None, _) => "reported",
                (Some(_), true) => "pass",
                (Some(_), false) => "fail",
            };
            w.write_record([
                b.name.to_string(),
                b.trials.to_string(),
                b.passed.to_string(),
                sig17(b.pass_rate()),
                b.threshold.map(sig17).unwrap_or_default(),
                sig17(b.worst_slack),
                status.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn blobs(dim: usize) -> Generator {
    Generator::Blobs {
        dim,
        separation: 2.0,
        sigma: 0.5,
    }
}

fn draw(gen: &Generator, n: usize, seed: u64, shift: &[f64]) -> Result<Domain> {
    let d = Domain::new(gen.draw(n, seed)?, ShiftDescriptor::new(gen.name(), 0.0))?;
    translate_domain(&d, shift)
}

fn random_linear(rng: &mut impl Rng, dim: usize) -> Result<Classifier> {
    let scale = rng.gen_range(0.2..3.0);
    let w = (0..dim).map(|_| scale * normal(rng)).collect();
    Classifier::linear(w, 0.5 * normal(rng))
}

fn random_shift(rng: &mut impl Rng, dim: usize, max: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let m = rng.gen_range(0.0..max);
    v.iter().map(|x| m * x / norm).collect()
}

fn joint_w(a: &Domain, b: &Domain, p: f64) -> Result<f64> {
    Ok(exact_wasserstein(&PointCloud::from_joint(a, 1.0), &PointCloud::from_joint(b, 1.0), p)?.0)
}

/// Identical distributions: the loss gap and the transport distance are both 0.
fn identical_battery(cfg: &ExperimentConfig, workers: usize) -> Result<BatteryResult> {
    let v = &cfg.verify;
    let gen = blobs(v.lemma_dim);
    let ramp = Metric::Loss(LossSpec::ramp());
    let trials: Vec<usize> = (0..v.identical_trials).collect();
    let slacks = par_map(workers, &trials, |&i| -> Result<f64> {
        let mut rng = stream(cfg.seed, &[name_key("identical"), i as u64]);
        let d = draw(&gen, v.lemma_n, rng.gen(), &vec![0.0; v.lemma_dim])?;
        let h = random_linear(&mut rng, v.lemma_dim)?;
        let gap = (population_error(&h, d.evaluation_samples(), &ramp)?
            - population_error(&h, d.evaluation_samples(), &ramp)?)
        .abs();
        let bound = error_diff_bound(1.0, lipschitz_upper_bound(&h), joint_w(&d, &d, 1.0)?)?;
        Ok(bound - gap)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BatteryResult::from_slacks("identical", Some(1.0), &slacks))
}

/// Error-difference inequality on translated Gaussian blobs: transport on
/// `lemma_n`-point joint clouds, losses on fresh `lemma_n_eval`-point draws,
/// slack `4 / sqrt(lemma_n_eval)`.
fn lemma_batteries(cfg: &ExperimentConfig, workers: usize) -> Result<[BatteryResult; 3]> {
    let v = &cfg.verify;
    let gen = blobs(v.lemma_dim);
    let ramp = Metric::Loss(LossSpec::ramp());
    let noise = 4.0 / (v.lemma_n_eval as f64).sqrt();
    let trials: Vec<usize> = (0..v.lemma_trials).collect();
    let out = par_map(workers, &trials, |&i| -> Result<(f64, f64)> {
        let mut rng = stream(cfg.seed, &[name_key("lemma"), i as u64]);
        let zero = vec![0.0; v.lemma_dim];
        let shift = random_shift(&mut rng, v.lemma_dim, 2.0);
        let mu = draw(&gen, v.lemma_n, rng.gen(), &zero)?;
        let nu = draw(&gen, v.lemma_n, rng.gen(), &shift)?;
        let mu_eval = draw(&gen, v.lemma_n_eval, rng.gen(), &zero)?;
        let nu_eval = draw(&gen, v.lemma_n_eval, rng.gen(), &shift)?;
        let h = random_linear(&mut rng, v.lemma_dim)?;
        let r = lipschitz_upper_bound(&h);
        let gap = (population_error(&h, mu_eval.evaluation_samples(), &ramp)?
            - population_error(&h, nu_eval.evaluation_samples(), &ramp)?)
        .abs();
        let s1 = error_diff_bound(1.0, r, joint_w(&mu, &nu, 1.0)?)? + noise - gap;
        let s2 = error_diff_bound(1.0, r, joint_w(&mu, &nu, 2.0)?)? + noise - gap;
        Ok((s1, s2))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let s1: Vec<f64> = out.iter().map(|s| s.0).collect();
    let s2: Vec<f64> = out.iter().map(|s| s.1).collect();
    // a p = 2 failure where p = 1 passed counts against monotonicity
    let mono: Vec<f64> = out
        .iter()
        .map(|&(a, b)| if a >= 0.0 && b < 0.0 { b } else { (b - a).max(0.0) })
        .collect();
    Ok([
        BatteryResult::from_slacks("lemma-w1", Some(0.99), &s1),
        BatteryResult::from_slacks("lemma-w2", None, &s2),
        BatteryResult::from_slacks("p-monotonicity", Some(1.0), &mono),
    ])
}

/// Discrepancy estimate against its upper bound on short rotated-moons paths,
/// with ramp loss, joint W_1 steps and `R` the largest Lipschitz bound in the
/// hypothesis bank.
fn disc_battery(cfg: &ExperimentConfig, workers: usize) -> Result<BatteryResult> {
    let gen = Generator::TwoMoons { noise_sigma: 0.1 };
    let loss = LossSpec::ramp();
    let trials: Vec<usize> = (0..cfg.verify.disc_trials).collect();
    let out = par_map(workers, &trials, |&i| -> Result<Vec<f64>> {
        let mut rng = stream(cfg.seed, &[name_key("disc"), i as u64]);
        let end = rng.gen_range(10.0..120.0);
        let path = make_rotation_path(&gen, 0.0, end, 4, 30, rng.gen())?;
        let template = if i % 2 == 0 {
            Classifier::init_linear(2, 0)?
        } else {
            Classifier::init_mlp(2, &[8], Activation::Relu, 0)?
        };
        let spec = BankSpec {
            template,
            train: TrainConfig {
                epochs: 20,
                batch_size: 10,
                ..Default::default()
            },
            random: 4,
            seed: rng.gen(),
        };
        let domains = path.domains();
        let bank = hypothesis_bank(domains, &loss, &spec)?;
        let r = bank.iter().map(lipschitz_upper_bound).fold(0.0, f64::max);
        let delta = path_shift_profile(&path, 1.0, true, 1.0)?.max_delta();
        let raw: Vec<f64> = (0..domains.len()).map(|_| normal(&mut rng).exp()).collect();
        let total: f64 = raw.iter().sum();
        let qs = [
            WeightVector::uniform(domains.len())?,
            WeightVector::new(raw.iter().map(|w| w / total).collect())?,
        ];
        qs.iter()
            .map(|q| {
                let est = disc_estimate(domains, q, &loss, &bank)?.value;
                Ok(disc_upper_bound(q, loss.rho(), r, delta)? + 1e-9 - est)
            })
            .collect()
    })?;
    let mut slacks = Vec::new();
    for s in out {
        slacks.extend(s?);
    }
    Ok(BatteryResult::from_slacks("disc", Some(1.0), &slacks))
}

/// One gradual run on the configured rotation path with per-step held-out sets.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationRun {
    pub seed: u64,
    /// Zero-one error of `h_t` on held-out domain `t`, for `t = 0..=T`.
    pub errors: Vec<f64>,
    /// Per-step transport distance between consecutive path domains.
    pub step_distances: Vec<f64>,
    /// Lipschitz upper bound of `h_t`, for `t = 0..=T`.
    pub lipschitz: Vec<f64>,
}

/// Gradual runs on the rotation path of `cfg` with `T = verify.stability_t`,
/// the first swept `n` and `verify.stability_seeds` seeds. A CSV dataset is
/// replaced by two moons. Trials share seeds with [`super::run_sweep`].
pub fn rotation_runs(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<RotationRun>> {
    let mut c = cfg.clone();
    c.sweep.n_eval = cfg.verify.stability_n_eval;
    if c.dataset.generator().is_none() {
        c.dataset = ExperimentConfig::default().dataset;
    }
    let steps = cfg.verify.stability_t;
    let n = cfg.sweep.n_values[0];
    let seeds: Vec<u64> = (0..cfg.verify.stability_seeds as u64).collect();
    par_map(workers, &seeds, |&seed| -> Result<RotationRun> {
        let data = prepare_trial(&c, PathKind::Rotation, steps, n, seed)?;
        let profile = path_shift_profile(&data.path, c.transport.p, c.transport.joint, c.transport.label_weight)?;
        let zo = Metric::ZeroOne;
        let mut h = data.h0.clone();
        let mut errors = vec![population_error(&h, &data.step_test_set(&c, PathKind::Rotation, 0)?, &zo)?];
        let mut lipschitz = vec![lipschitz_upper_bound(&h)];
        for t in 1..=steps {
            let train = TrainConfig {
                seed: derive_seed(data.st_train.seed, &[t as u64]),
                ..data.st_train
            };
            h = self_train_step(&h, data.path.domain(t).unlabeled(), &c.loss, &train, &c.self_train)?.classifier;
            errors.push(population_error(&h, &data.step_test_set(&c, PathKind::Rotation, t)?, &zo)?);
            lipschitz.push(lipschitz_upper_bound(&h));
        }
        Ok(RotationRun {
            seed,
            errors,
            step_distances: profile.deltas,
            lipschitz,
        })
    })?
    .into_iter()
    .collect()
}

/// Stability: `eps_t(h_t) - eps_{t-1}(h_{t-1}) <= 3 rho sqrt(R^2 + 1) W_t + 5 / sqrt(n)`
/// with `R` the larger Lipschitz bound of the two models.
/// Growth: the affine fit of `eps_t(h_t)`, `t = 1..T`, is no worse than the
/// best exponential fit.
fn run_batteries(cfg: &ExperimentConfig, runs: &[RotationRun]) -> Result<[BatteryResult; 2]> {
    let rho = cfg.loss.rho();
    let noise = 5.0 / (cfg.sweep.n_values[0] as f64).sqrt();
    let mut stab = Vec::new();
    let mut growth = Vec::new();
    for run in runs {
        for t in 1..run.errors.len() {
            let r = run.lipschitz[t - 1].max(run.lipschitz[t]);
            let bound = 3.0 * error_diff_bound(rho, r, run.step_distances[t - 1])? + noise;
            stab.push(bound - (run.errors[t] - run.errors[t - 1]));
        }
        if run.errors.len() >= 4 {
            let fit = compare_growth(&run.errors[1..])?;
            growth.push(if fit.affine_no_worse() {
                (fit.exponential_rss - fit.affine_rss).max(0.0)
            } else {
                fit.exponential_rss - fit.affine_rss
            });
        }
    }
    Ok([
        BatteryResult::from_slacks("stability", Some(0.95), &stab),
        BatteryResult::from_slacks("growth", Some(0.8), &growth),
    ])
}

/// Runs every battery. Fully determined by the config and its master seed.
pub fn verify_inequalities(cfg: &ExperimentConfig, workers: usize) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut batteries = vec![identical_battery(cfg, workers)?];
    batteries.extend(lemma_batteries(cfg, workers)?);
    batteries.push(disc_battery(cfg, workers)?);
    if cfg.verify.stability_seeds > 0 && cfg.verify.stability_t > 0 {
        let runs = rotation_runs(cfg, workers)?;
        batteries.extend(run_batteries(cfg, &runs)?);
    }
    Ok(VerifyReport { batteries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.verify.lemma_trials = 40;
        c.verify.identical_trials = 10;
        c.verify.disc_trials = 2;
        c.verify.stability_seeds = 2;
        c.verify.stability_t = 4;
        c.verify.stability_n_eval = 200;
        c.sweep.n_values = vec![20];
        c.train.epochs = 2;
        c.source_train.epochs = 20;
        c
    }

    #[test]
    fn quick_report_is_reproducible() {
        let c = quick();
        let a = verify_inequalities(&c, 1).unwrap();
        let b = verify_inequalities(&c, 2).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.batteries.len(), 7);
        let id = a.battery("identical").unwrap();
        assert_eq!((id.passed, id.trials), (10, 10));
        assert_eq!(id.worst_slack, 0.0);
        assert!(a.battery("disc").unwrap().ok());
        assert!(a.battery("p-monotonicity").unwrap().ok());
    }
}
