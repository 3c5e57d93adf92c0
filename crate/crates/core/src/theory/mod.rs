//! Closed-form bound terms, the discrepancy measure and the optimal number
//! of steps.
//!
//! Every big-O constant is explicit and defaults to 1. Logarithms are natural.

mod disc;
mod report;

pub use disc::{disc_estimate, disc_upper_bound, hypothesis_bank, BankSpec, DiscEstimate, WeightVector};
pub use report::{BoundReport, TERM_NAMES};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be a finite non-negative number, got {v}")))
    }
}

/// Constants of the generalization bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConstants {
    /// Lipschitz constant of the loss.
    pub rho: f64,
    /// Lipschitz constant of the classifier.
    pub r: f64,
    /// Rademacher constant of the hypothesis class (`<= B / sqrt(n)`).
    pub b: f64,
    /// Confidence parameter in (0, 1).
    pub delta: f64,
    pub num_layers: u32,
    /// Optional upper bound on the loss.
    pub m: Option<f64>,
    /// Scale constants c1..c6 of the six big-O terms.
    pub c: [f64; 6],
    /// Constant in front of the sample terms of the exponential comparison bound.
    pub comparison_c: f64,
    /// Rate inside `e^{rate * T}` of the exponential comparison bound.
    pub comparison_rate: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            rho: 1.0,
            r: 1.0,
            b: 1.0,
            delta: 0.05,
            num_layers: 2,
            m: None,
            c: [1.0; 6],
            comparison_c: 1.0,
            comparison_rate: 0.1,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("rho", self.rho)?;
        check_nonneg("R", self.r)?;
        check_nonneg("B", self.b)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(m) = self.m {
            check_nonneg("M", m)?;
        }
        for (i, c) in self.c.iter().enumerate() {
            if !c.is_finite() {
                return Err(invalid(format!("c{} must be finite", i + 1)));
            }
        }
        if !(self.comparison_c.is_finite() && self.comparison_rate.is_finite()) {
            return Err(invalid("comparison constants must be finite"));
        }
        Ok(())
    }
}

/// `rho * sqrt(R^2 + 1) * wp`: largest change in expected loss between two
/// distributions at p-Wasserstein distance `wp`.
pub fn error_diff_bound(rho: f64, r: f64, wp: f64) -> Result<f64> {
    check_nonneg("rho", rho)?;
    check_nonneg("R", r)?;
    check_nonneg("W_p", wp)?;
    Ok(rho * (r * r + 1.0).sqrt() * wp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityKind {
    Linear,
    Mlp,
}

impl FromStr for ComplexityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ComplexityKind::Linear),
            "mlp" => Ok(ComplexityKind::Mlp),
            other => Err(invalid(format!("unknown complexity kind `{other}`"))),
        }
    }
}

/// Closed-form sequential Rademacher upper bounds at horizon `t` (real, >= 1).
///
/// Linear: `R / sqrt(t)`. MLP with `L` layers: `scale * R * sqrt(ln(t)^(3(L-1)) / t)`;
/// at `t = 1` the log factor is replaced by 1, giving `scale * R`.
pub fn seq_rademacher_bound(kind: ComplexityKind, t: f64, r: f64, num_layers: u32, scale: f64) -> Result<f64> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(invalid(format!("t must be at least 1, got {t}")));
    }
    check_nonneg("R", r)?;
    Ok(match kind {
        ComplexityKind::Linear => r / t.sqrt(),
        ComplexityKind::Mlp => {
            check_nonneg("scale", scale)?;
            if num_layers == 0 {
                return Err(invalid("an MLP has at least one layer"));
            }
            if t == 1.0 {
                scale * r
            } else {
                let e = 3.0 * (f64::from(num_layers) - 1.0);
                scale * r * (t.ln().powf(e) / t).sqrt()
            }
        }
    })
}

fn check_tn(t: f64, n: f64) -> Result<()> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(invalid(format!("T must be at least 1, got {t}")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(invalid(format!("n must be at least 1, got {n}")));
    }
    Ok(())
}

/// Itemized generalization bound for `T` steps (real-valued, `>= 1`) with `n`
/// samples per domain and average per-step shift `delta_avg`.
pub fn gen_bound(k: &BoundConstants, eps0: f64, t: f64, n: f64, delta_avg: f64) -> Result<BoundReport> {
    k.validate()?;
    check_tn(t, n)?;
    check_nonneg("delta_avg", delta_avg)?;
    let log_inv_delta = (1.0 / k.delta).ln();
    let nt = n * t;
    let l = f64::from(k.num_layers);
    let terms = [
        t * delta_avg,
        t / n.sqrt(),
        t * (log_inv_delta / n).sqrt(),
        1.0 / nt.sqrt(),
        (nt.ln().powf(3.0 * l - 2.0) / nt).sqrt(),
        (log_inv_delta / nt).sqrt(),
    ];
    let total = eps0 + k.c.iter().zip(&terms).map(|(c, v)| c * v).sum::<f64>();
    Ok(BoundReport {
        eps0,
        t,
        n,
        delta_avg,
        coefficients: k.c,
        terms,
        total,
        comparison_exponential_total: exponential_bound(k, eps0, t, n, k.comparison_rate)?,
        t_star: None,
    })
}

/// Exponential-in-T comparison bound
/// `e^{rate * T} * (eps0 + c * (1/sqrt(n) + sqrt(ln T / n)))`.
pub fn exponential_bound(k: &BoundConstants, eps0: f64, t: f64, n: f64, rate: f64) -> Result<f64> {
    check_tn(t, n)?;
    if !rate.is_finite() {
        return Err(invalid("rate must be finite"));
    }
    Ok((rate * t).exp() * (eps0 + k.comparison_c * (1.0 / n.sqrt() + (t.ln() / n).sqrt())))
}

/// Both candidates for the optimal number of steps and their maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalT {
    /// `L / delta_max`: steps needed to cover distance `L` at the largest step size.
    pub length_branch: f64,
    /// `scale * (1 / (2 (1 + delta_max sqrt(n))))^(2/3)`: stationary point of the bound.
    pub stationary_branch: f64,
    pub t_star: f64,
    /// `max(1, round(t_star))`.
    pub t_star_int: u64,
}

pub fn optimal_t(delta_max: f64, n: f64, source_target_distance: f64, scale: f64) -> Result<OptimalT> {
    check_nonneg("delta_max", delta_max)?;
    check_nonneg("source-target distance", source_target_distance)?;
    if !(n >= 1.0 && n.is_finite()) {
        return Err(invalid(format!("n must be at least 1, got {n}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale must be positive"));
    }
    let length_branch = if delta_max > 0.0 {
        source_target_distance / delta_max
    } else if source_target_distance == 0.0 {
        0.0
    } else {
        return Err(Error::InfeasiblePath(format!(
            "distance {source_target_distance} cannot be covered with zero step size"
        )));
    };
    let stationary_branch = scale * (1.0 / (2.0 * (1.0 + delta_max * n.sqrt()))).powf(2.0 / 3.0);
    let t_star = length_branch.max(stationary_branch);
    Ok(OptimalT {
        length_branch,
        stationary_branch,
        t_star,
        t_star_int: (t_star.round() as u64).max(1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalOptimum {
    pub t: f64,
    pub error: f64,
    /// The minimum is at neither the smallest nor the largest swept T.
    pub interior: bool,
}

/// Swept T with the lowest mean error; ties go to the smaller T.
pub fn empirical_optimal_t(sweep: &[(f64, f64)]) -> Result<EmpiricalOptimum> {
    if sweep.len() < 3 {
        return Err(invalid(format!("need at least 3 sweep points, got {}", sweep.len())));
    }
    let mut pts = sweep.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0;
    for (i, p) in pts.iter().enumerate() {
        if p.1 < pts[best].1 {
            best = i;
        }
    }
    Ok(EmpiricalOptimum {
        t: pts[best].0,
        error: pts[best].1,
        interior: best > 0 && best + 1 < pts.len(),
    })
}

/// Smallest T in `[lo, hi]` beyond which the exponential comparison bound
/// stays above the linear bound, located by scanning `steps` grid cells and
/// bisecting the last sign change. `None` if the exponential bound is not
/// above at `hi`.
pub fn bound_crossover(k: &BoundConstants, eps0: f64, n: f64, delta_avg: f64, lo: f64, hi: f64, steps: usize) -> Result<Option<f64>> {
    let diff = |t: f64| -> Result<f64> {
        let r = gen_bound(k, eps0, t, n, delta_avg)?;
        Ok(r.comparison_exponential_total - r.total)
    };
    if !(lo >= 1.0 && hi > lo) || steps == 0 {
        return Err(invalid("crossover search needs 1 <= lo < hi and steps >= 1"));
    }
    if diff(hi)? <= 0.0 {
        return Ok(None);
    }
    let h = (hi - lo) / steps as f64;
    let mut right = hi;
    let mut left = None;
    for i in (0..steps).rev() {
        let t = lo + h * i as f64;
        if diff(t)? <= 0.0 {
            left = Some(t);
            break;
        }
        right = t;
    }
    let Some(mut a) = left else {
        return Ok(Some(lo));
    };
    let mut b = right;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if diff(m)? <= 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-12 * b {
            break;
        }
    }
    Ok(Some(b))
}

/// Smallest second difference of the bound total over a uniform grid on
/// `[lo, hi]`, normalized by `h^2`. Positive means strictly convex on the grid.
pub fn min_second_difference(k: &BoundConstants, eps0: f64, n: f64, delta_avg: f64, lo: f64, hi: f64, steps: usize) -> Result<f64> {
    if steps < 2 {
        return Err(invalid("need at least 2 grid cells"));
    }
    let h = (hi - lo) / steps as f64;
    let vals = (0..=steps)
        .map(|i| gen_bound(k, eps0, lo + h * i as f64, n, delta_avg).map(|r| r.total))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (h * h))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_diff_examples() {
        assert_eq!(error_diff_bound(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(error_diff_bound(1.0, 0.0, 0.37).unwrap(), 0.37);
        assert!((error_diff_bound(2.0, 3f64.sqrt(), 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(error_diff_bound(-1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(seq_rademacher_bound(ComplexityKind::Linear, 4.0, 1.0, 1, 1.0).unwrap(), 0.5);
        assert_eq!(seq_rademacher_bound(ComplexityKind::Linear, 1.0, 2.0, 1, 1.0).unwrap(), 2.0);
        let e2 = std::f64::consts::E.powi(2);
        let v = seq_rademacher_bound(ComplexityKind::Mlp, e2, 1.0, 2, 1.0).unwrap();
        // sqrt(2^3 / e^2) = sqrt(8) / e
        assert!((v - 8f64.sqrt() / std::f64::consts::E).abs() < 1e-14);
        assert!((v - 1.0405).abs() < 1e-4);
        assert_eq!(seq_rademacher_bound(ComplexityKind::Mlp, 1.0, 3.0, 3, 2.0).unwrap(), 6.0);
        assert!("cnn".parse::<ComplexityKind>().is_err());
    }

    #[test]
    fn gen_bound_example_terms() {
        let r = gen_bound(&BoundConstants::default(), 0.1, 10.0, 100.0, 0.05).unwrap();
        assert!((r.terms[0] - 0.5).abs() < 1e-15);
        assert!((r.terms[1] - 1.0).abs() < 1e-15);
        assert!((r.terms[3] - 0.031622776601683794).abs() < 1e-15);
        assert!((r.total - r.recompute_total()).abs() < 1e-15);
        let zero = BoundConstants {
            c: [0.0; 6],
            ..Default::default()
        };
        assert_eq!(gen_bound(&zero, 0.1, 10.0, 100.0, 0.05).unwrap().total, 0.1);
    }

    #[test]
    fn doubling_shift_only_doubles_path_term() {
        let k = BoundConstants::default();
        let a = gen_bound(&k, 0.1, 7.0, 50.0, 0.03).unwrap();
        let b = gen_bound(&k, 0.1, 7.0, 50.0, 0.06).unwrap();
        assert_eq!(b.terms[0], 2.0 * a.terms[0]);
        assert_eq!(a.terms[1..], b.terms[1..]);
    }

    #[test]
    fn exponential_examples() {
        let k = BoundConstants::default();
        let v = exponential_bound(&k, 0.1, 10.0, 100.0, 0.1).unwrap();
        let expect = std::f64::consts::E * (0.2 + (10f64.ln() / 100.0).sqrt());
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.9562).abs() < 1e-4);
        let flat = BoundConstants {
            comparison_c: 0.0,
            ..Default::default()
        };
        assert_eq!(exponential_bound(&flat, 0.1, 10.0, 100.0, 0.0).unwrap(), 0.1);
        let a = exponential_bound(&k, 0.1, 10.0, 100.0, 0.1).unwrap();
        let b = exponential_bound(&k, 0.1, 11.0, 100.0, 0.1).unwrap();
        assert!(b >= a * 0.1f64.exp());
    }

    #[test]
    fn optimal_t_examples() {
        let a = optimal_t(1.0, 4.0, 0.0, 1.0).unwrap();
        assert!((a.t_star - (1.0f64 / 6.0).powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((a.t_star - 0.30285).abs() < 1e-4);
        assert_eq!(a.t_star_int, 1);
        let b = optimal_t(0.0, 9.0, 0.0, 1.0).unwrap();
        assert!((b.t_star - 0.62996).abs() < 1e-4);
        let c = optimal_t(0.5, 100.0, 10.0, 1.0).unwrap();
        assert_eq!(c.t_star, 20.0);
        assert_eq!(c.t_star_int, 20);
        assert!(matches!(optimal_t(0.0, 4.0, 1.0, 1.0), Err(Error::InfeasiblePath(_))));
    }

    #[test]
    fn empirical_optimum_rules() {
        let a = empirical_optimal_t(&[(2.0, 0.5), (10.0, 0.2), (50.0, 0.4)]).unwrap();
        assert_eq!((a.t, a.interior), (10.0, true));
        let b = empirical_optimal_t(&[(2.0, 0.5), (10.0, 0.4), (50.0, 0.3)]).unwrap();
        assert_eq!((b.t, b.interior), (50.0, false));
        let c = empirical_optimal_t(&[(2.0, 0.5), (10.0, 0.3), (50.0, 0.3)]).unwrap();
        assert_eq!(c.t, 10.0);
        assert!(empirical_optimal_t(&[(1.0, 0.1), (2.0, 0.2)]).is_err());
    }

    #[test]
    fn crossover_with_defaults() {
        let k = BoundConstants::default();
        let t = bound_crossover(&k, 0.1, 100.0, 0.05, 1.0, 200.0, 400).unwrap().unwrap();
        let at = |t: f64| {
            let r = gen_bound(&k, 0.1, t, 100.0, 0.05).unwrap();
            r.comparison_exponential_total - r.total
        };
        assert!(at(t) >= 0.0 && at(t - 1e-6) <= 0.0, "{t}");
        assert!(t > 10.0 && t < 100.0, "{t}");
    }
}
