use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::classifier::Classifier;
use super::loss::{LossSpec, Target};
use crate::datasets::{Label, LabeledSample};
use crate::error::{invalid, Error, Result};
use crate::seeding::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps_hat: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::adam(),
            lr: 0.01,
            epochs: 50,
            batch_size: 32,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid("weight_decay must be nonnegative"));
        }
        if let Optimizer::Adam { beta1, beta2, eps_hat } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps_hat > 0.0) {
                return Err(invalid("adam needs beta1, beta2 in [0, 1) and eps_hat > 0"));
            }
        }
        Ok(())
    }
}

/// One training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example<'a> {
    pub x: &'a [f64],
    pub target: Target,
}

impl<'a> Example<'a> {
    pub fn hard(x: &'a [f64], y: Label) -> Self {
        Self {
            x,
            target: Target::Hard(y),
        }
    }

    pub fn from_sample(s: &'a LabeledSample) -> Self {
        Self::hard(&s.x, s.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub classifier: Classifier,
    /// Mean data loss before the first update.
    pub initial_loss: f64,
    /// Mean data loss after each epoch, on the full training set.
    pub epoch_losses: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Mean loss of `h` over `data` (no weight decay term).
pub fn empirical_loss(h: &Classifier, data: &[Example<'_>], loss: &LossSpec) -> f64 {
    data.iter()
        .map(|e| loss.eval_target(h.score_unchecked(e.x), &e.target))
        .sum::<f64>()
        / data.len() as f64
}

fn check_data(h: &Classifier, data: &[Example<'_>], loss: &LossSpec) -> Result<()> {
    if data.is_empty() {
        return Err(invalid("training data is empty"));
    }
    let d = h.input_dim();
    for e in data {
        if e.x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.x.len(),
            });
        }
        loss.check_target(&e.target)?;
    }
    Ok(())
}

/// Minibatch empirical risk minimization starting from `init`.
///
/// Each epoch visits a fresh seeded permutation of the data. The gradient of a
/// batch is the mean loss gradient plus `weight_decay * params`. Fully
/// deterministic for a given `(init, data, cfg)`. Fails on the first
/// non-finite parameter or loss.
pub fn train_erm(init: &Classifier, data: &[Example<'_>], loss: &LossSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    init.validate()?;
    check_data(init, data, loss)?;
    let mut h = init.clone();
    let initial_loss = empirical_loss(&h, data, loss);
    let np = h.num_params();
    let mut params = h.params();
    let mut grad = vec![0.0; np];
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, &[epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let e = &data[i];
                let s = h.score_unchecked(e.x);
                let dl = loss.grad_target(s, &e.target);
                if dl != 0.0 {
                    h.accumulate_grad(e.x, dl * inv, &mut grad);
                }
            }
            if cfg.weight_decay > 0.0 {
                for (g, p) in grad.iter_mut().zip(&params) {
                    *g += cfg.weight_decay * p;
                }
            }
            step += 1;
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= cfg.lr * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps_hat } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for k in 0..np {
                        m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                        v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                        params[k] -= cfg.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps_hat);
                    }
                }
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite {
                    epoch,
                    detail: format!("parameters diverged at lr {}; lower the learning rate", cfg.lr),
                });
            }
            h.set_params(&params)?;
        }
        let l = empirical_loss(&h, data, loss);
        if !l.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                detail: format!("training loss became {l}; lower the learning rate"),
            });
        }
        epoch_losses.push(l);
    }
    Ok(TrainOutcome {
        classifier: h,
        initial_loss,
        epoch_losses,
    })
}

/// How [`population_error`] scores a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    ZeroOne,
    Loss(LossSpec),
}

/// Mean loss (or misclassification rate) of `h` over labeled samples.
pub fn population_error(h: &Classifier, eval_set: &[LabeledSample], metric: &Metric) -> Result<f64> {
    if eval_set.is_empty() {
        return Err(invalid("evaluation set is empty"));
    }
    let mut total = 0.0;
    for s in eval_set {
        let score = h.score(&s.x)?;
        total += match metric {
            Metric::ZeroOne => f64::from(u8::from(Label::from_score(score) != s.y)),
            Metric::Loss(l) => l.eval(score, s.y),
        };
    }
    Ok(total / eval_set.len() as f64)
}
