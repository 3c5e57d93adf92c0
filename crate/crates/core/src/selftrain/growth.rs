use serde::Serialize;

use crate::error::{invalid, Result};

/// Least-squares fits of an error sequence `y_t`, `t = 1..=len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    /// `alpha + beta * t`.
    pub affine: (f64, f64),
    pub affine_rss: f64,
    /// `a * e^{b t}`.
    pub exponential: (f64, f64),
    pub exponential_rss: f64,
}

impl GrowthFit {
    /// The affine model fits at least as well as the best exponential one.
    pub fn affine_no_worse(&self) -> bool {
        self.affine_rss <= self.exponential_rss * (1.0 + 1e-12) + 1e-15
    }
}

const B_MAX: f64 = 2.0;
const GRID: usize = 4000;

fn exp_rss(y: &[f64], b: f64) -> (f64, f64) {
    let e: Vec<f64> = (1..=y.len()).map(|t| (b * t as f64).exp()).collect();
    let ee: f64 = e.iter().map(|v| v * v).sum();
    let a = e.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / ee;
    let rss = e.iter().zip(y).map(|(p, q)| (q - a * p).powi(2)).sum();
    (a, rss)
}

/// Fits both models. The exponential rate is searched on a grid over
/// `[-2, 2]` and refined by golden-section search; the scale has a closed
/// form for each rate.
pub fn compare_growth(y: &[f64]) -> Result<GrowthFit> {
    if y.len() < 3 {
        return Err(invalid("growth comparison needs at least 3 points"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite error value"));
    }
    let n = y.len() as f64;
    let ts: Vec<f64> = (1..=y.len()).map(|t| t as f64).collect();
    let mt = ts.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = ts.iter().map(|a| (a - mt) * (a - mt)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mt;
    let affine_rss = ts.iter().zip(y).map(|(t, v)| (v - alpha - beta * t).powi(2)).sum();

    let step = 2.0 * B_MAX / GRID as f64;
    let mut best_b = 0.0;
    let mut best = exp_rss(y, 0.0).1;
    for i in 0..=GRID {
        let b = -B_MAX + step * i as f64;
        let r = exp_rss(y, b).1;
        if r < best {
            best = r;
            best_b = b;
        }
    }
    let (mut lo, mut hi) = (best_b - step, best_b + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if exp_rss(y, m1).1 <= exp_rss(y, m2).1 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mid = 0.5 * (lo + hi);
    let b = if exp_rss(y, mid).1 < best { mid } else { best_b };
    let (a, exponential_rss) = exp_rss(y, b);
    Ok(GrowthFit {
        affine: (alpha, beta),
        affine_rss,
        exponential: (a, b),
        exponential_rss,
    })
}
