//! Config-driven experiments: sweeps over (T, n, seed, path kind), path
//! comparisons, bound curves and inequality batteries. Every output is CSV and
//! a pure function of the config and master seed.

mod compare;
mod config;
mod curves;
mod sweep;
mod verify;

pub use compare::{compare_paths, CompareRow, CompareTable};
pub use config::{
    BoundsSpec, CompareSpec, DatasetSpec, ExperimentConfig, ModelSpec, PathKind, PathSpec, SeedList, SweepSpec,
    TransportSpec, VerifySpec,
};
pub use curves::{emit_bound_curves, BoundCurves, CurveRow};
pub use sweep::{
    aggregate_rows, parse_sweep_records, prepare_trial, run_sweep, run_trial, trial_path, trial_seed, AggregateRecord, Statistic,
    SweepRecord, SweepResult, TrialData, SWEEP_HEADER,
};
pub use verify::{rotation_runs, verify_inequalities, BatteryResult, RotationRun, VerifyReport};

use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Maps `f` over `items` on a pool of `workers` threads (0 means one per
/// core), returning results in input order.
pub(crate) fn par_map<T, R, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}
