//! Browser bindings: path snapshots, bound curves and a gradual self-training run.
//!
//! Each export has a plain Rust twin so the logic runs and is tested natively.

use wasm_bindgen::prelude::*;

use gdalab::harness::{emit_bound_curves, prepare_trial, trial_path, BoundsSpec, ExperimentConfig, PathKind};
use gdalab::model::{population_error, Metric};
use gdalab::selftrain::{baselines, GradualSelfTrainer, StepOptions};
use gdalab::transport::path_shift_profile;

fn config(end_deg: f64, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.path.end_deg = end_deg;
    cfg.seed = seed;
    cfg
}

/// Domains of one path, flattened as `(t, x, y, label)` rows with labels in {-1, 1},
/// followed by the per-step shift profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSnapshot {
    pub points: Vec<f64>,
    pub deltas: Vec<f64>,
}

pub fn path_snapshot(kind: &str, end_deg: f64, steps: usize, n: usize, seed: u64) -> Result<PathSnapshot, String> {
    let kind: PathKind = kind.parse().map_err(|e: gdalab::Error| e.to_string())?;
    let cfg = config(end_deg, seed);
    let path = trial_path(&cfg, kind, steps, n, 0).map_err(|e| e.to_string())?;
    let mut points = Vec::with_capacity((steps + 1) * n * 4);
    for (t, d) in path.domains().iter().enumerate() {
        for s in d.evaluation_samples() {
            points.extend([t as f64, s.x[0], s.x[1], s.y.value()]);
        }
    }
    let profile = path_shift_profile(&path, cfg.transport.p, false, 1.0).map_err(|e| e.to_string())?;
    Ok(PathSnapshot {
        points,
        deltas: profile.deltas,
    })
}

/// `(T, linear total, exponential total)` rows plus T* and the crossover (NaN if none).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSnapshot {
    pub rows: Vec<f64>,
    pub t_star: f64,
    pub crossover: f64,
}

pub fn curve_snapshot(n: f64, delta_avg: f64, eps0: f64, t_max: f64, distance: f64) -> Result<CurveSnapshot, String> {
    let spec = BoundsSpec {
        n,
        delta_avg,
        eps0,
        t_max,
        source_target_distance: distance,
        ..Default::default()
    };
    let c = emit_bound_curves(&spec).map_err(|e| e.to_string())?;
    Ok(CurveSnapshot {
        rows: c
            .rows
            .iter()
            .flat_map(|r| [r.t, r.gen_bound_total, r.exponential_bound_total])
            .collect(),
        t_star: c.t_star.t_star,
        crossover: c.crossover.unwrap_or(f64::NAN),
    })
}

/// Held-out accuracy after each step of a rotation run (index 0 is `h0`),
/// and the two baselines on the final domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSnapshot {
    pub step_accuracy: Vec<f64>,
    pub source_only: f64,
    pub vanilla: f64,
}

pub fn rotation_run(end_deg: f64, steps: usize, n: usize, seed: u64) -> Result<RunSnapshot, String> {
    let cfg = config(end_deg, seed);
    let run = || -> gdalab::Result<RunSnapshot> {
        let data = prepare_trial(&cfg, PathKind::Rotation, steps, n, 0)?;
        let sets = (0..=steps)
            .map(|t| data.step_test_set(&cfg, PathKind::Rotation, t))
            .collect::<gdalab::Result<Vec<_>>>()?;
        let mut runner = GradualSelfTrainer::new(cfg.loss, data.st_train);
        runner.eval_sets = Some(&sets);
        let (_, trace) = runner.run(&data.h0, &data.path)?;
        let mut step_accuracy = vec![1.0 - population_error(&data.h0, &sets[0], &Metric::ZeroOne)?];
        step_accuracy.extend(trace.zero_one_errors().iter().map(|e| 1.0 - e));
        let base = baselines(
            &data.h0,
            data.path.target(),
            &cfg.loss,
            &data.st_train,
            &StepOptions::default(),
            Some(&sets[steps]),
        )?;
        Ok(RunSnapshot {
            step_accuracy,
            source_only: 1.0 - base.source_only,
            vanilla: 1.0 - base.vanilla_st,
        })
    };
    run().map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub struct PathView(PathSnapshot);

#[wasm_bindgen]
impl PathView {
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.0.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn deltas(&self) -> Vec<f64> {
        self.0.deltas.clone()
    }
}

#[wasm_bindgen]
pub struct CurveView(CurveSnapshot);

#[wasm_bindgen]
impl CurveView {
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> Vec<f64> {
        self.0.rows.clone()
    }

    #[wasm_bindgen(getter, js_name = tStar)]
    pub fn t_star(&self) -> f64 {
        self.0.t_star
    }

    #[wasm_bindgen(getter)]
    pub fn crossover(&self) -> f64 {
        self.0.crossover
    }
}

#[wasm_bindgen]
pub struct RunView(RunSnapshot);

#[wasm_bindgen]
impl RunView {
    #[wasm_bindgen(getter, js_name = stepAccuracy)]
    pub fn step_accuracy(&self) -> Vec<f64> {
        self.0.step_accuracy.clone()
    }

    #[wasm_bindgen(getter, js_name = sourceOnly)]
    pub fn source_only(&self) -> f64 {
        self.0.source_only
    }

    #[wasm_bindgen(getter)]
    pub fn vanilla(&self) -> f64 {
        self.0.vanilla
    }
}

#[wasm_bindgen(js_name = pathSnapshot)]
pub fn path_snapshot_js(kind: &str, end_deg: f64, steps: usize, n: usize, seed: u64) -> Result<PathView, JsError> {
    path_snapshot(kind, end_deg, steps, n, seed).map(PathView).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = boundCurves)]
pub fn bound_curves_js(n: f64, delta_avg: f64, eps0: f64, t_max: f64, distance: f64) -> Result<CurveView, JsError> {
    curve_snapshot(n, delta_avg, eps0, t_max, distance).map(CurveView).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rotationRun)]
pub fn rotation_run_js(end_deg: f64, steps: usize, n: usize, seed: u64) -> Result<RunView, JsError> {
    rotation_run(end_deg, steps, n, seed).map(RunView).map_err(|e| JsError::new(&e))
}
