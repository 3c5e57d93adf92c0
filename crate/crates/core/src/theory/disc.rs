use serde::Serialize;

use crate::datasets::Domain;
use crate::error::{invalid, Result};
use crate::model::{population_error, train_erm, Classifier, Example, LossSpec, Metric, TrainConfig};
use crate::seeding::derive_seed;

/// Probability vector over domain indices `0..t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    q: Vec<f64>,
}

impl WeightVector {
    /// Accepts non-negative weights summing to 1 within 1e-12.
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(invalid("weight vector is empty"));
        }
        if q.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("weights must be finite and non-negative"));
        }
        let s: f64 = q.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {s}, not 1")));
        }
        Ok(Self { q })
    }

    pub fn uniform(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(invalid("weight vector is empty"));
        }
        Ok(Self {
            q: vec![1.0 / t as f64; t],
        })
    }

    pub fn one_hot(t: usize, index: usize) -> Result<Self> {
        if index >= t {
            return Err(invalid(format!("index {index} outside 0..{t}")));
        }
        let mut q = vec![0.0; t];
        q[index] = 1.0;
        Ok(Self { q })
    }

    /// `t`, the number of domains weighted.
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.q
    }
}

/// `rho * sqrt(R^2 + 1) * sum_tau q_tau (t - tau - 1) * delta`.
pub fn disc_upper_bound(q: &WeightVector, rho: f64, r: f64, delta: f64) -> Result<f64> {
    let t = q.len();
    let lag = exact_dot(q.weights().iter().enumerate().map(|(tau, w)| (*w, (t - tau - 1) as f64)));
    super::error_diff_bound(rho, r, lag * delta)
}

/// Dot product with error-free products and compensated summation, so the
/// result is the correctly rounded value for short vectors.
fn exact_dot(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |x: f64| {
        let s = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - s) + x } else { (x - s) + sum };
        sum = s;
    };
    for (a, b) in pairs {
        let p = a * b;
        add(p);
        add(a.mul_add(b, -p));
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscEstimate {
    pub value: f64,
    /// Index into the bank of the maximizing hypothesis.
    pub argmax: usize,
}

/// Lower estimate of the discrepancy: the largest
/// `eps_{t-1}(h) - sum_tau q_tau eps_tau(h)` over the bank, with empirical
/// losses on the first `t = q.len()` domains' evaluation samples. A negative
/// maximum is reported as 0.
pub fn disc_estimate(domains: &[Domain], q: &WeightVector, loss: &LossSpec, bank: &[Classifier]) -> Result<DiscEstimate> {
    let t = q.len();
    if domains.len() < t {
        return Err(invalid(format!("{t} weights but only {} domains", domains.len())));
    }
    if bank.is_empty() {
        return Err(invalid("hypothesis bank is empty"));
    }
    let metric = Metric::Loss(*loss);
    let mut best = DiscEstimate {
        value: f64::NEG_INFINITY,
        argmax: 0,
    };
    for (i, h) in bank.iter().enumerate() {
        let eps = domains[..t]
            .iter()
            .map(|d| population_error(h, d.evaluation_samples(), &metric))
            .collect::<Result<Vec<_>>>()?;
        let mix: f64 = q.weights().iter().zip(&eps).map(|(w, e)| w * e).sum();
        let v = eps[t - 1] - mix;
        if v > best.value {
            best = DiscEstimate { value: v, argmax: i };
        }
    }
    best.value = best.value.max(0.0);
    Ok(best)
}

/// Recipe for the hypothesis bank used by [`disc_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct BankSpec {
    /// Architecture template; its parameters are not used.
    pub template: Classifier,
    pub train: TrainConfig,
    pub random: usize,
    pub seed: u64,
}

/// Bank = one classifier fit to each domain's evaluation labels, `random`
/// freshly initialized classifiers, and the sign-flipped copy of each.
pub fn hypothesis_bank(domains: &[Domain], loss: &LossSpec, spec: &BankSpec) -> Result<Vec<Classifier>> {
    let mut bank = Vec::new();
    for (t, d) in domains.iter().enumerate() {
        let init = spec.template.fresh_like(derive_seed(spec.seed, &[0, t as u64]));
        let data: Vec<Example<'_>> = d.evaluation_samples().iter().map(Example::from_sample).collect();
        let cfg = TrainConfig {
            seed: derive_seed(spec.seed, &[1, t as u64]),
            ..spec.train
        };
        bank.push(train_erm(&init, &data, loss, &cfg)?.classifier);
    }
    for i in 0..spec.random {
        bank.push(spec.template.fresh_like(derive_seed(spec.seed, &[2, i as u64])));
    }
    let flipped: Vec<Classifier> = bank.iter().map(Classifier::negated).collect();
    bank.extend(flipped);
    Ok(bank)
}
