use std::time::Instant;

use super::config::{ExperimentConfig, PathKind};
use super::par_map;
use crate::datasets::{
    draw_normalized, draw_scaled, load_csv_path, make_rotation_path, make_translation_path, rotate_domain_in_plane,
    translate_domain, Domain, DomainPath, Generator, LabeledSample,
};
use crate::error::{invalid, Result};
use crate::model::{population_error, Classifier, Metric, TrainConfig};
use crate::numfmt::sig17;
use crate::selftrain::{baselines, fit_source, GradualSelfTrainer};
use crate::seeding::derive_seed;
use crate::transport::{make_detour_path, make_geodesic_path, path_shift_profile};

/// Seed keys below the per-trial seed.
const KEY_SOURCE: u64 = 0;
const KEY_INIT: u64 = 1;
const KEY_TEST: u64 = 2;
const KEY_TARGET: u64 = 5;

/// Per-trial seed. It depends on `(master, n, seed)` only, so every T and
/// path kind of one seed sees the same source draw, initialization and test
/// draw, and adding sweep points never changes existing trials.
pub fn trial_seed(master: u64, n: usize, seed: u64) -> u64 {
    derive_seed(master, &[n as u64, seed])
}

/// Everything a trial needs before adaptation starts.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub path: DomainPath,
    /// Held-out draw in source coordinates, before any shift.
    pub test_base: Option<Domain>,
    pub source_test: Vec<LabeledSample>,
    pub target_test: Vec<LabeledSample>,
    pub h0: Classifier,
    /// Training config of the self-training steps, seed included.
    pub st_train: TrainConfig,
}

impl TrialData {
    /// Held-out set shifted like path domain `t`; only for rotation and
    /// translation paths.
    pub fn step_test_set(&self, cfg: &ExperimentConfig, kind: PathKind, t: usize) -> Result<Vec<LabeledSample>> {
        let base = self
            .test_base
            .as_ref()
            .ok_or_else(|| invalid(format!("no per-step test sets for {kind} paths")))?;
        let frac = t as f64 / self.path.steps() as f64;
        let d = match kind {
            PathKind::Rotation => {
                let angle = cfg.path.start_deg + (cfg.path.end_deg - cfg.path.start_deg) * frac;
                rotate_domain_in_plane(base, angle, (0, 1))?
            }
            PathKind::Translation => {
                let off: Vec<f64> = offset(cfg)?.iter().map(|o| o * frac).collect();
                translate_domain(base, &off)?
            }
            _ => return Err(invalid(format!("no per-step test sets for {kind} paths"))),
        };
        Ok(d.evaluation_samples().to_vec())
    }
}

fn offset(cfg: &ExperimentConfig) -> Result<&[f64]> {
    cfg.path
        .offset
        .as_deref()
        .ok_or_else(|| invalid("path.offset is not set"))
}

fn generator(cfg: &ExperimentConfig) -> Result<Generator> {
    cfg.dataset
        .generator()
        .ok_or_else(|| invalid("this path kind needs a synthetic dataset"))
}

/// Moves a source-coordinate domain to the end of a geodesic or detour path:
/// translated by `path.offset` when set, rotated by the end angle otherwise.
fn to_target(cfg: &ExperimentConfig, d: &Domain) -> Result<Domain> {
    match &cfg.path.offset {
        Some(off) => translate_domain(d, off),
        None => rotate_domain_in_plane(d, cfg.path.end_deg, (0, 1)),
    }
}

fn to_source(cfg: &ExperimentConfig, d: &Domain) -> Result<Domain> {
    match &cfg.path.offset {
        Some(_) => Ok(d.clone()),
        None => rotate_domain_in_plane(d, cfg.path.start_deg, (0, 1)),
    }
}

type Built = (DomainPath, Option<Domain>, Vec<LabeledSample>, Vec<LabeledSample>);

/// The domain path a trial adapts along.
pub fn trial_path(cfg: &ExperimentConfig, kind: PathKind, steps: usize, n: usize, seed: u64) -> Result<DomainPath> {
    Ok(build(cfg, kind, steps, n, trial_seed(cfg.seed, n, seed))?.0)
}

fn build(cfg: &ExperimentConfig, kind: PathKind, steps: usize, n: usize, ds: u64) -> Result<Built> {
    Ok(match kind {
        PathKind::Csv => {
            let (file, split) = cfg
                .dataset
                .csv_split(steps, n)
                .ok_or_else(|| invalid("csv paths need a csv dataset"))?;
            let (path, _) = load_csv_path(&file, &split)?;
            let src = path.source().evaluation_samples().to_vec();
            let tgt = path.target().evaluation_samples().to_vec();
            (path, None, src, tgt)
        }
        PathKind::Rotation | PathKind::Translation => {
            let gen = generator(cfg)?;
            let path = match kind {
                PathKind::Rotation => {
                    make_rotation_path(&gen, cfg.path.start_deg, cfg.path.end_deg, steps, n, ds)?
                }
                _ => make_translation_path(&gen, offset(cfg)?, steps, n, ds)?,
            };
            let base = draw_scaled(&gen, cfg.sweep.n_eval, path.normalization_scale(), derive_seed(ds, &[KEY_TEST]))?;
            let (src, tgt) = match kind {
                PathKind::Rotation => (
                    rotate_domain_in_plane(&base, cfg.path.start_deg, (0, 1))?,
                    rotate_domain_in_plane(&base, cfg.path.end_deg, (0, 1))?,
                ),
                _ => (base.clone(), translate_domain(&base, offset(cfg)?)?),
            };
            let (src, tgt) = (src.evaluation_samples().to_vec(), tgt.evaluation_samples().to_vec());
            (path, Some(base), src, tgt)
        }
        PathKind::Geodesic | PathKind::Detour(_) => {
            let gen = generator(cfg)?;
            let raw = draw_normalized(&gen, n, derive_seed(ds, &[KEY_SOURCE]))?;
            let scale = raw.descriptor.value;
            let source = to_source(cfg, &raw)?;
            let target = to_target(cfg, &draw_scaled(&gen, n, scale, derive_seed(ds, &[KEY_TARGET]))?)?;
            let (p, cc) = (cfg.transport.p, cfg.path.class_conditional);
            let path = match kind {
                PathKind::Detour(m) => make_detour_path(&source, &target, steps, m, ds, p, cc)?,
                _ => make_geodesic_path(&source, &target, steps, cc, p)?,
            };
            let base = draw_scaled(&gen, cfg.sweep.n_eval, scale, derive_seed(ds, &[KEY_TEST]))?;
            let src = to_source(cfg, &base)?.evaluation_samples().to_vec();
            let tgt = to_target(cfg, &base)?.evaluation_samples().to_vec();
            (path, None, src, tgt)
        }
    })
}

/// Builds the path, held-out sets and source model of one trial.
pub fn prepare_trial(cfg: &ExperimentConfig, kind: PathKind, steps: usize, n: usize, seed: u64) -> Result<TrialData> {
    let ds = trial_seed(cfg.seed, n, seed);
    let (path, test_base, source_test, target_test) = build(cfg, kind, steps, n, ds)?;
    let init = cfg.model.init(path.dim(), derive_seed(ds, &[KEY_INIT]))?;
    let h0 = fit_source(&init, path.source(), &cfg.loss, &TrainConfig { seed: ds, ..cfg.source_train })?;
    Ok(TrialData {
        path,
        test_base,
        source_test,
        target_test,
        h0,
        st_train: TrainConfig { seed: ds, ..cfg.train },
    })
}

/// One row of a sweep. Accuracies are `1 - zero-one error` on held-out sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub t: usize,
    pub n: usize,
    pub seed: u64,
    pub path_kind: PathKind,
    pub source_acc: f64,
    pub target_acc_gradual: f64,
    pub target_acc_vanilla_st: f64,
    pub target_acc_source_only: f64,
    pub delta_avg: f64,
    /// `T * delta_avg`.
    pub path_length: f64,
    pub runtime_seconds: f64,
    /// `ok`, or `error: <message>` for a failed trial (numbers are then NaN).
    pub status: String,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(t: usize, n: usize, seed: u64, path_kind: PathKind, err: String) -> Self {
        Self {
            t,
            n,
            seed,
            path_kind,
            source_acc: f64::NAN,
            target_acc_gradual: f64::NAN,
            target_acc_vanilla_st: f64::NAN,
            target_acc_source_only: f64::NAN,
            delta_avg: f64::NAN,
            path_length: f64::NAN,
            runtime_seconds: 0.0,
            status: format!("error: {}", err.replace(['\n', '\r'], " ")),
        }
    }

    fn values(&self) -> [f64; 7] {
        [
            self.source_acc,
            self.target_acc_gradual,
            self.target_acc_vanilla_st,
            self.target_acc_source_only,
            self.delta_avg,
            self.path_length,
            self.runtime_seconds,
        ]
    }
}

/// Runs one trial; failures come back as a row with an error status.
pub fn run_trial(cfg: &ExperimentConfig, kind: PathKind, steps: usize, n: usize, seed: u64) -> SweepRecord {
    let start = Instant::now();
    match try_trial(cfg, kind, steps, n, seed) {
        Ok(mut r) => {
            if cfg.sweep.record_timing {
                r.runtime_seconds = start.elapsed().as_secs_f64();
            }
            r
        }
        Err(e) => SweepRecord::failed(steps, n, seed, kind, e.to_string()),
    }
}

fn try_trial(cfg: &ExperimentConfig, kind: PathKind, steps: usize, n: usize, seed: u64) -> Result<SweepRecord> {
    let data = prepare_trial(cfg, kind, steps, n, seed)?;
    let profile = path_shift_profile(&data.path, cfg.transport.p, cfg.transport.joint, cfg.transport.label_weight)?;
    let mut runner = GradualSelfTrainer::new(cfg.loss, data.st_train);
    runner.step = cfg.self_train;
    let (ht, _) = runner.run(&data.h0, &data.path)?;
    let zo = Metric::ZeroOne;
    let base = baselines(
        &data.h0,
        data.path.target(),
        &cfg.loss,
        &data.st_train,
        &cfg.self_train,
        Some(&data.target_test),
    )?;
    Ok(SweepRecord {
        t: steps,
        n,
        seed,
        path_kind: kind,
        source_acc: 1.0 - population_error(&data.h0, &data.source_test, &zo)?,
        target_acc_gradual: 1.0 - population_error(&ht, &data.target_test, &zo)?,
        target_acc_vanilla_st: 1.0 - base.vanilla_st,
        target_acc_source_only: 1.0 - base.source_only,
        delta_avg: profile.delta_avg,
        path_length: profile.path_length,
        runtime_seconds: 0.0,
        status: "ok".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    /// Sample standard deviation (n - 1 denominator; 0 for a single row).
    Std,
}

/// Mean or standard deviation over the successful seeds of one (T, n, kind).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub t: usize,
    pub n: usize,
    pub path_kind: PathKind,
    pub statistic: Statistic,
    /// Successful trials aggregated.
    pub count: usize,
    pub failed: usize,
    /// Same order as the numeric columns of [`SweepRecord`].
    pub values: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

pub const SWEEP_HEADER: [&str; 12] = [
    "T",
    "n",
    "seed",
    "path_kind",
    "source_acc",
    "target_acc_gradual",
    "target_acc_vanilla_st",
    "target_acc_source_only",
    "delta_avg",
    "path_length",
    "runtime_seconds",
    "status",
];

impl SweepResult {
    /// Raw rows in sweep order, then `mean` and `std` rows per (T, n, kind).
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SWEEP_HEADER)?;
        for r in &self.records {
            let mut row = vec![r.t.to_string(), r.n.to_string(), r.seed.to_string(), r.path_kind.to_string()];
            row.extend(r.values().iter().map(|v| sig17(*v)));
            row.push(r.status.clone());
            w.write_record(&row)?;
        }
        for a in &self.aggregates {
            let stat = match a.statistic {
                Statistic::Mean => "mean",
                Statistic::Std => "std",
            };
            let mut row = vec![a.t.to_string(), a.n.to_string(), stat.to_string(), a.path_kind.to_string()];
            row.extend(a.values.iter().map(|v| sig17(*v)));
            row.push(if a.failed == 0 {
                format!("ok ({} seeds)", a.count)
            } else {
                format!("partial ({} ok, {} failed)", a.count, a.failed)
            });
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn aggregate(&self, t: usize, n: usize, kind: PathKind, statistic: Statistic) -> Option<&AggregateRecord> {
        self.aggregates
            .iter()
            .find(|a| a.t == t && a.n == n && a.path_kind == kind && a.statistic == statistic)
    }
}

/// Mean and sample standard deviation of each numeric column over `rows`.
pub fn aggregate_rows(rows: &[&SweepRecord]) -> ([f64; 7], [f64; 7]) {
    let mut mean = [f64::NAN; 7];
    let mut std = [f64::NAN; 7];
    if rows.is_empty() {
        return (mean, std);
    }
    let k = rows.len() as f64;
    for c in 0..7 {
        let m = rows.iter().map(|r| r.values()[c]).sum::<f64>() / k;
        let ss = rows.iter().map(|r| (r.values()[c] - m).powi(2)).sum::<f64>();
        mean[c] = m;
        std[c] = if rows.len() > 1 { (ss / (k - 1.0)).sqrt() } else { 0.0 };
    }
    (mean, std)
}

/// Runs every (T, n, seed, path kind) combination of the config on up to
/// `workers` threads. Rows come back in config order (T outermost, path kind
/// innermost) whatever the completion order.
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let seeds = cfg.sweep.seeds.seeds();
    let mut jobs = Vec::new();
    for &t in &cfg.sweep.t_values {
        for &n in &cfg.sweep.n_values {
            for &s in &seeds {
                for &k in &cfg.path.kinds {
                    jobs.push((t, n, s, k));
                }
            }
        }
    }
    let records = par_map(workers, &jobs, |&(t, n, s, k)| run_trial(cfg, k, t, n, s))?;
    let mut aggregates = Vec::new();
    for &t in &cfg.sweep.t_values {
        for &n in &cfg.sweep.n_values {
            for &k in &cfg.path.kinds {
                let group: Vec<&SweepRecord> = records
                    .iter()
                    .filter(|r| r.t == t && r.n == n && r.path_kind == k)
                    .collect();
                let ok: Vec<&SweepRecord> = group.iter().copied().filter(|r| r.is_ok()).collect();
                let (mean, std) = aggregate_rows(&ok);
                for (statistic, values) in [(Statistic::Mean, mean), (Statistic::Std, std)] {
                    aggregates.push(AggregateRecord {
                        t,
                        n,
                        path_kind: k,
                        statistic,
                        count: ok.len(),
                        failed: group.len() - ok.len(),
                        values,
                    });
                }
            }
        }
    }
    Ok(SweepResult { records, aggregates })
}

/// Parses a sweep CSV back into raw rows, skipping aggregate rows.
pub fn parse_sweep_records(text: &str) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        if row.len() != SWEEP_HEADER.len() {
            return Err(invalid(format!("sweep row has {} fields", row.len())));
        }
        let Ok(seed) = row[2].parse::<u64>() else { continue };
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|_| invalid(format!("bad number `{}` in column {}", &row[i], SWEEP_HEADER[i])))
        };
        let int = |i: usize| -> Result<usize> {
            row[i]
                .parse()
                .map_err(|_| invalid(format!("bad integer `{}` in column {}", &row[i], SWEEP_HEADER[i])))
        };
        out.push(SweepRecord {
            t: int(0)?,
            n: int(1)?,
            seed,
            path_kind: row[3].parse()?,
            source_acc: num(4)?,
            target_acc_gradual: num(5)?,
            target_acc_vanilla_st: num(6)?,
            target_acc_source_only: num(7)?,
            delta_avg: num(8)?,
            path_length: num(9)?,
            runtime_seconds: num(10)?,
            status: row[11].to_string(),
        });
    }
    Ok(out)
}
