//! Self-training on pseudo-labels, the gradual loop along a domain path, and
//! the source-only and one-shot baselines.
//!
//! The loop only ever touches [`UnlabeledView`]s of adaptation domains;
//! ground-truth labels are read solely to score the trace.

mod growth;

pub use growth::{compare_growth, GrowthFit};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datasets::{Domain, DomainPath, Label, LabeledSample, UnlabeledView};
use crate::error::{invalid, Result};
use crate::model::{
    empirical_loss, population_error, train_erm, Classifier, Example, LossSpec, Metric, Target, TrainConfig,
};
use crate::numfmt::sig17;
use crate::seeding::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepOptions {
    /// Fit `sign(h(x))` (true) or the raw score `h(x)` (squared loss only).
    pub hard: bool,
    /// Keep only samples with `|h(x)| >= threshold`. Unset uses every sample.
    pub conf_threshold: Option<f64>,
    /// Start each fit from a fresh initialization instead of `h`.
    pub cold_start: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            hard: true,
            conf_threshold: None,
            cold_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub classifier: Classifier,
    /// Samples that passed the confidence filter.
    pub used: usize,
    /// Fraction of used samples where the new model's sign matches the old one's.
    pub pseudo_agreement: f64,
    /// Mean pseudo-label loss after fitting.
    pub train_loss: f64,
}

/// One self-training step: label `s` with `h`, then refit on those labels.
pub fn self_train_step(
    h: &Classifier,
    s: UnlabeledView<'_>,
    loss: &LossSpec,
    cfg: &TrainConfig,
    opts: &StepOptions,
) -> Result<StepOutcome> {
    if s.is_empty() {
        return Err(invalid("self-training needs at least one unlabeled sample"));
    }
    if !opts.hard && !loss.accepts_soft_targets() {
        return Err(invalid(format!(
            "soft pseudo-labels need the squared loss, not {}",
            loss.kind
        )));
    }
    let mut examples = Vec::with_capacity(s.len());
    for x in s.iter() {
        let score = h.score(x)?;
        if let Some(th) = opts.conf_threshold {
            if score.abs() < th {
                continue;
            }
        }
        let target = if opts.hard {
            Target::Hard(Label::from_score(score))
        } else {
            Target::Soft(score)
        };
        examples.push(Example { x, target });
    }
    if examples.is_empty() {
        return Err(invalid(format!(
            "confidence threshold {:?} removed all {} samples",
            opts.conf_threshold,
            s.len()
        )));
    }
    let init = if opts.cold_start {
        h.fresh_like(derive_seed(cfg.seed, &[0x636f6c64]))
    } else {
        h.clone()
    };
    let out = train_erm(&init, &examples, loss, cfg)?;
    let agree = examples
        .iter()
        .filter(|e| {
            let old = Label::from_score(h.score_unchecked(e.x));
            Label::from_score(out.classifier.score_unchecked(e.x)) == old
        })
        .count();
    let train_loss = empirical_loss(&out.classifier, &examples, loss);
    Ok(StepOutcome {
        used: examples.len(),
        pseudo_agreement: agree as f64 / examples.len() as f64,
        train_loss,
        classifier: out.classifier,
    })
}

/// Fits a classifier on the labeled source domain.
pub fn fit_source(init: &Classifier, source: &Domain, loss: &LossSpec, cfg: &TrainConfig) -> Result<Classifier> {
    let data: Vec<Example<'_>> = source.labeled()?.iter().map(Example::from_sample).collect();
    Ok(train_erm(init, &data, loss, cfg)?.classifier)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub descriptor: String,
    pub used: usize,
    pub pseudo_agreement: f64,
    pub train_loss: f64,
    pub eval_zero_one: f64,
    pub eval_loss: f64,
    pub seconds: f64,
}

/// Per-domain record of a gradual run, one entry per executed step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdaptationTrace {
    pub records: Vec<TraceRecord>,
}

impl AdaptationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn zero_one_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eval_zero_one).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "t",
            "descriptor",
            "pseudo_agreement",
            "train_loss",
            "eval_zero_one",
            "eval_loss",
            "seconds",
        ])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.descriptor.clone(),
                sig17(r.pseudo_agreement),
                sig17(r.train_loss),
                sig17(r.eval_zero_one),
                sig17(r.eval_loss),
                sig17(r.seconds),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Gradual self-training driver.
#[derive(Debug, Clone)]
pub struct GradualSelfTrainer<'a> {
    pub loss: LossSpec,
    pub cfg: TrainConfig,
    pub step: StepOptions,
    /// Held-out labeled sets, one per path domain, used for the trace
    /// instead of the path's own evaluation labels.
    pub eval_sets: Option<&'a [Vec<LabeledSample>]>,
}

impl<'a> GradualSelfTrainer<'a> {
    pub fn new(loss: LossSpec, cfg: TrainConfig) -> Self {
        Self {
            loss,
            cfg,
            step: StepOptions::default(),
            eval_sets: None,
        }
    }

    /// Runs `h_t = ST(h_{t-1}, S_t)` for `t = 1..=T`. Step `t` trains with
    /// seed `derive_seed(cfg.seed, [t])`.
    pub fn run(&self, h0: &Classifier, path: &DomainPath) -> Result<(Classifier, AdaptationTrace)> {
        if let Some(sets) = self.eval_sets {
            if sets.len() != path.domains().len() {
                return Err(invalid(format!(
                    "{} evaluation sets for a path of {} domains",
                    sets.len(),
                    path.domains().len()
                )));
            }
        }
        let mut h = h0.clone();
        let mut trace = AdaptationTrace::default();
        for t in 1..=path.steps() {
            let start = Instant::now();
            let domain = path.domain(t);
            let cfg = TrainConfig {
                seed: derive_seed(self.cfg.seed, &[t as u64]),
                ..self.cfg
            };
            let out = self_train_step(&h, domain.unlabeled(), &self.loss, &cfg, &self.step)?;
            h = out.classifier;
            let seconds = start.elapsed().as_secs_f64();
            let eval = match self.eval_sets {
                Some(sets) => sets[t].as_slice(),
                None => domain.evaluation_samples(),
            };
            trace.records.push(TraceRecord {
                t,
                descriptor: domain.descriptor.text.clone(),
                used: out.used,
                pseudo_agreement: out.pseudo_agreement,
                train_loss: out.train_loss,
                eval_zero_one: population_error(&h, eval, &Metric::ZeroOne)?,
                eval_loss: population_error(&h, eval, &Metric::Loss(self.loss))?,
                seconds,
            });
        }
        Ok((h, trace))
    }
}

/// `h_T` and its trace for hard-label gradual self-training.
pub fn gradual_self_train(
    h0: &Classifier,
    path: &DomainPath,
    loss: &LossSpec,
    cfg: &TrainConfig,
    hard: bool,
) -> Result<(Classifier, AdaptationTrace)> {
    let mut runner = GradualSelfTrainer::new(*loss, *cfg);
    runner.step.hard = hard;
    runner.run(h0, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineErrors {
    /// Target zero-one error of `h0`.
    pub source_only: f64,
    /// Target zero-one error after one self-training step on the target.
    pub vanilla_st: f64,
}

/// Source-only and one-shot self-training errors on `target`, scored on
/// `eval` when given and on the target's own evaluation labels otherwise.
pub fn baselines(
    h0: &Classifier,
    target: &Domain,
    loss: &LossSpec,
    cfg: &TrainConfig,
    opts: &StepOptions,
    eval: Option<&[LabeledSample]>,
) -> Result<BaselineErrors> {
    let eval = eval.unwrap_or_else(|| target.evaluation_samples());
    let cfg = TrainConfig {
        seed: derive_seed(cfg.seed, &[1]),
        ..*cfg
    };
    let st = self_train_step(h0, target.unlabeled(), loss, &cfg, opts)?;
    Ok(BaselineErrors {
        source_only: population_error(h0, eval, &Metric::ZeroOne)?,
        vanilla_st: population_error(&st.classifier, eval, &Metric::ZeroOne)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_rotation_path, Generator, ShiftDescriptor};
    use crate::model::Optimizer;

    fn toy_domain() -> Domain {
        let s = (0..20)
            .map(|i| {
                let x = -1.0 + i as f64 / 10.0 + 0.05;
                LabeledSample::new(vec![x * 0.9], Label::from_score(x))
            })
            .collect();
        Domain::new(s, ShiftDescriptor::new("toy", 0.0)).unwrap()
    }

    #[test]
    fn separable_pseudo_labels_are_reproduced() {
        let d = toy_domain();
        let h = Classifier::linear(vec![0.7], 0.0).unwrap();
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            lr: 0.5,
            epochs: 100,
            batch_size: 5,
            ..Default::default()
        };
        let out = self_train_step(&h, d.unlabeled(), &LossSpec::logistic(), &cfg, &StepOptions::default()).unwrap();
        assert_eq!(out.used, 20);
        assert_eq!(out.pseudo_agreement, 1.0);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let d = toy_domain();
        let h = Classifier::init_default(1, 3).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = self_train_step(&h, d.unlabeled(), &LossSpec::logistic(), &cfg, &StepOptions::default()).unwrap();
        assert_eq!(out.classifier, h);
    }

    #[test]
    fn confidence_filter_counts_and_errors() {
        let d = toy_domain();
        let h = Classifier::linear(vec![1.0], 0.0).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let opts = StepOptions {
            conf_threshold: Some(0.5),
            ..Default::default()
        };
        let out = self_train_step(&h, d.unlabeled(), &LossSpec::logistic(), &cfg, &opts).unwrap();
        assert!(out.used < 20 && out.used > 0);
        let all_out = StepOptions {
            conf_threshold: Some(10.0),
            ..Default::default()
        };
        assert!(self_train_step(&h, d.unlabeled(), &LossSpec::logistic(), &cfg, &all_out).is_err());
    }

    #[test]
    fn soft_labels_need_squared_loss() {
        let d = toy_domain();
        let h = Classifier::linear(vec![1.0], 0.0).unwrap();
        let soft = StepOptions {
            hard: false,
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 2,
            ..Default::default()
        };
        assert!(self_train_step(&h, d.unlabeled(), &LossSpec::logistic(), &cfg, &soft).is_err());
        assert!(self_train_step(&h, d.unlabeled(), &LossSpec::squared(), &cfg, &soft).is_ok());
    }

    #[test]
    fn single_step_path_equals_vanilla_self_training() {
        let gen = Generator::TwoMoons { noise_sigma: 0.1 };
        let path = make_rotation_path(&gen, 0.0, 30.0, 1, 40, 5).unwrap();
        let loss = LossSpec::logistic();
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let h0 = fit_source(&Classifier::init_default(2, 1).unwrap(), path.source(), &loss, &cfg).unwrap();
        let (h1, trace) = gradual_self_train(&h0, &path, &loss, &cfg, true).unwrap();
        assert_eq!(trace.len(), 1);
        let step_cfg = TrainConfig {
            seed: derive_seed(cfg.seed, &[1]),
            ..cfg
        };
        let direct = self_train_step(&h0, path.target().unlabeled(), &loss, &step_cfg, &StepOptions::default()).unwrap();
        assert_eq!(h1, direct.classifier);
        let b = baselines(&h0, path.target(), &loss, &cfg, &StepOptions::default(), None).unwrap();
        assert_eq!(b.vanilla_st, trace.records[0].eval_zero_one);
    }

    #[test]
    fn trace_csv_has_fixed_columns() {
        let gen = Generator::TwoMoons { noise_sigma: 0.1 };
        let path = make_rotation_path(&gen, 0.0, 30.0, 3, 20, 5).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            ..Default::default()
        };
        let h0 = Classifier::init_linear(2, 0).unwrap();
        let (_, trace) = gradual_self_train(&h0, &path, &LossSpec::hinge(), &cfg, true).unwrap();
        let csv = trace.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,descriptor,pseudo_agreement,train_loss,eval_zero_one,eval_loss,seconds"
        );
        let ts: Vec<usize> = trace.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![1, 2, 3]);
        assert_eq!(lines.count(), 3);
    }
}
