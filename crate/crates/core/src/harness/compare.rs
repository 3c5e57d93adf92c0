use super::config::{ExperimentConfig, PathKind};
use super::par_map;
use super::sweep::run_trial;
use crate::error::{invalid, Result};
use crate::numfmt::sig17;

/// One path kind of a comparison, averaged over the successful seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub path_kind: PathKind,
    pub t: usize,
    pub n: usize,
    pub path_length: f64,
    pub target_error: f64,
    pub target_error_std: f64,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareTable {
    /// Sorted by mean path length; ties keep config order.
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    pub fn row(&self, kind: PathKind) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.path_kind == kind)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "path_kind",
            "T",
            "n",
            "path_length",
            "target_error",
            "target_error_std",
            "seeds_ok",
            "seeds_failed",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.path_kind.to_string(),
                r.t.to_string(),
                r.n.to_string(),
                sig17(r.path_length),
                sig17(r.target_error),
                sig17(r.target_error_std),
                r.seeds_ok.to_string(),
                r.seeds_failed.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Gradual self-training along the geodesic and along each detour magnitude
/// of `cfg.compare`, at `T = compare.t` and the first swept `n`, over all
/// sweep seeds. Trials share seeds with [`super::run_sweep`].
pub fn compare_paths(cfg: &ExperimentConfig, workers: usize) -> Result<CompareTable> {
    cfg.validate()?;
    if cfg.compare.detours.is_empty() {
        return Err(invalid("compare.detours needs at least one magnitude"));
    }
    if cfg.dataset.generator().is_none() {
        return Err(invalid("path comparison needs a synthetic dataset"));
    }
    let t = cfg.compare.t;
    let n = cfg.sweep.n_values[0];
    let mut kinds = vec![PathKind::Geodesic];
    for &m in &cfg.compare.detours {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(invalid(format!("bad detour magnitude {m}")));
        }
        kinds.push(PathKind::Detour(m));
    }
    let seeds = cfg.sweep.seeds.seeds();
    let jobs: Vec<(PathKind, u64)> = kinds
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let records = par_map(workers, &jobs, |&(k, s)| run_trial(cfg, k, t, n, s))?;
    let mut rows: Vec<CompareRow> = kinds
        .iter()
        .map(|&k| {
            let group: Vec<_> = records.iter().filter(|r| r.path_kind == k).collect();
            let ok: Vec<_> = group.iter().filter(|r| r.is_ok()).collect();
            let m = ok.len() as f64;
            let mean = |f: &dyn Fn(&super::SweepRecord) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / m;
            let err = mean(&|r| 1.0 - r.target_acc_gradual);
            let ss: f64 = ok.iter().map(|r| (1.0 - r.target_acc_gradual - err).powi(2)).sum();
            CompareRow {
                path_kind: k,
                t,
                n,
                path_length: mean(&|r| r.path_length),
                target_error: err,
                target_error_std: if ok.len() > 1 { (ss / (m - 1.0)).sqrt() } else { 0.0 },
                seeds_ok: ok.len(),
                seeds_failed: group.len() - ok.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.path_length.total_cmp(&b.path_length));
    Ok(CompareTable { rows })
}
