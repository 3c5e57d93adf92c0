use super::classifier::Classifier;
use super::loss::LossSpec;
use super::train::Example;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic_k - numeric_k|`, divided by the larger of the two
    /// gradients' max-norms (0 when both gradients vanish).
    pub max_rel_error: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub used: usize,
    pub excluded: usize,
}

/// Compares the analytic parameter gradient of the mean batch loss with
/// central finite differences of width `step`.
///
/// A sample is dropped when its score sits within `10 * step` of a loss kink,
/// or when any single-parameter perturbation moves it across a relu or loss
/// kink; the remaining samples have smooth loss in every probed direction.
pub fn grad_check(h: &Classifier, loss: &LossSpec, batch: &[Example<'_>], step: f64) -> GradCheckReport {
    let np = h.num_params();
    let base = h.params();
    let sig = |g: &Classifier, e: &Example<'_>| {
        let s = g.score_unchecked(e.x);
        (g.relu_pattern(e.x), loss.region(s, &e.target))
    };
    let base_sigs: Vec<_> = batch.iter().map(|e| sig(h, e)).collect();
    let mut ok: Vec<bool> = batch
        .iter()
        .map(|e| loss.kink_distance(h.score_unchecked(e.x), &e.target) > 10.0 * step)
        .collect();

    let mut plus = vec![vec![0.0; batch.len()]; np];
    let mut minus = vec![vec![0.0; batch.len()]; np];
    let mut g = h.clone();
    let mut p = base.clone();
    for k in 0..np {
        for (dir, store) in [(1.0, &mut plus[k]), (-1.0, &mut minus[k])] {
            p[k] = base[k] + dir * step;
            g.set_params(&p).expect("same shape");
            for (i, e) in batch.iter().enumerate() {
                if !ok[i] {
                    continue;
                }
                if sig(&g, e) != base_sigs[i] {
                    ok[i] = false;
                    continue;
                }
                store[i] = loss.eval_target(g.score_unchecked(e.x), &e.target);
            }
        }
        p[k] = base[k];
    }

    let used = ok.iter().filter(|&&v| v).count();
    let mut analytic = vec![0.0; np];
    let mut numeric = vec![0.0; np];
    if used > 0 {
        let inv = 1.0 / used as f64;
        for (i, e) in batch.iter().enumerate() {
            if ok[i] {
                let s = h.score_unchecked(e.x);
                let dl = loss.grad_target(s, &e.target);
                h.accumulate_grad(e.x, dl * inv, &mut analytic);
            }
        }
        for k in 0..np {
            numeric[k] = (0..batch.len())
                .filter(|&i| ok[i])
                .map(|i| (plus[k][i] - minus[k][i]) / (2.0 * step))
                .sum::<f64>()
                * inv;
        }
    }
    let scale = analytic
        .iter()
        .chain(&numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let max_rel_error = if scale == 0.0 {
        0.0
    } else {
        analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs() / scale)
            .fold(0.0, f64::max)
    };
    GradCheckReport {
        max_rel_error,
        analytic,
        numeric,
        used,
        excluded: batch.len() - used,
    }
}
