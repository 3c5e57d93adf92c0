use super::{check_pair, cost_matrix, root, Coupling, PointCloud, TransportPlan};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    /// Entropic regularization. `None` picks `0.01 * median pairwise cost`.
    pub reg: Option<f64>,
    pub max_iter: usize,
    /// Tolerance on the L1 row-marginal violation.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            reg: None,
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    /// Transport cost of the (rounded) entropic plan, entropy term excluded.
    pub distance: f64,
    pub coupling: Coupling,
    pub converged: bool,
    pub iterations: usize,
    /// L1 row-marginal violation of the unrounded plan at exit.
    pub marginal_error: f64,
    pub reg: f64,
}

fn logsumexp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Entropic optimal transport with log-domain Sinkhorn updates.
///
/// Non-convergence is reported through `converged`, not as an error. The
/// returned plan is rounded onto the exact marginals, so its cost is never
/// below the exact optimum.
pub fn sinkhorn_wasserstein(a: &PointCloud, b: &PointCloud, p: f64, cfg: &SinkhornConfig) -> Result<SinkhornResult> {
    check_pair(a, b, p)?;
    let (n, m) = (a.len(), b.len());
    let c = cost_matrix(a, b, p);
    let reg = match cfg.reg {
        Some(r) => r,
        None => {
            let med = median(c.clone());
            if med > 0.0 {
                0.01 * med
            } else {
                1e-3
            }
        }
    };
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(invalid(format!("regularization must be positive, got {reg}")));
    }
    if !(cfg.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let log_a = -(n as f64).ln();
    let log_b = -(m as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;
    let mut err = f64::INFINITY;

    while iterations < cfg.max_iter {
        iterations += 1;
        for i in 0..n {
            let row = &c[i * m..(i + 1) * m];
            f[i] = reg * log_a - reg * logsumexp((0..m).map(|j| (g[j] - row[j]) / reg));
        }
        for j in 0..m {
            g[j] = reg * log_b - reg * logsumexp((0..n).map(|i| (f[i] - c[i * m + j]) / reg));
        }
        // columns are exact after the g update; measure rows
        err = (0..n)
            .map(|i| {
                let s: f64 = (0..m).map(|j| ((f[i] + g[j] - c[i * m + j]) / reg).exp()).sum();
                (s - 1.0 / n as f64).abs()
            })
            .sum();
        if err <= cfg.tol {
            converged = true;
            break;
        }
    }

    let mut plan: Vec<f64> = (0..n * m)
        .map(|k| ((f[k / m] + g[k % m] - c[k]) / reg).exp())
        .collect();
    round_to_marginals(&mut plan, n, m);
    let total: f64 = plan.iter().zip(&c).map(|(w, cc)| w * cc).sum();
    let distance = root(total, p);
    Ok(SinkhornResult {
        distance,
        coupling: Coupling {
            plan: TransportPlan::Dense {
                rows: n,
                cols: m,
                mass: plan,
            },
            cost: distance,
            p,
            subsample: None,
        },
        converged,
        iterations,
        marginal_error: err,
        reg,
    })
}

/// Projects a nonnegative plan onto the transport polytope with uniform
/// marginals: shrink over-full rows, then columns, then add back the deficit
/// as a rank-one correction.
fn round_to_marginals(plan: &mut [f64], n: usize, m: usize) {
    let (ra, rb) = (1.0 / n as f64, 1.0 / m as f64);
    for i in 0..n {
        let s: f64 = plan[i * m..(i + 1) * m].iter().sum();
        if s > ra {
            let k = ra / s;
            plan[i * m..(i + 1) * m].iter_mut().for_each(|w| *w *= k);
        }
    }
    for j in 0..m {
        let s: f64 = (0..n).map(|i| plan[i * m + j]).sum();
        if s > rb {
            let k = rb / s;
            (0..n).for_each(|i| plan[i * m + j] *= k);
        }
    }
    let er: Vec<f64> = (0..n)
        .map(|i| (ra - plan[i * m..(i + 1) * m].iter().sum::<f64>()).max(0.0))
        .collect();
    let ec: Vec<f64> = (0..m)
        .map(|j| (rb - (0..n).map(|i| plan[i * m + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = er.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] += er[i] * ec[j] / total;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::exact_wasserstein;

    fn cloud(pts: Vec<Vec<f64>>) -> PointCloud {
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn identical_clouds_are_near_zero() {
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|k| {
                let t = k as f64 * 0.5;
                vec![t.cos(), t.sin() * 0.5]
            })
            .collect();
        let a = cloud(pts.clone());
        let cfg = SinkhornConfig {
            reg: Some(0.01),
            ..Default::default()
        };
        let r = sinkhorn_wasserstein(&a, &a, 2.0, &cfg).unwrap();
        let diam = 2.0;
        assert!(r.distance < 0.05 * diam, "{}", r.distance);
        assert!(r.marginal_error < 1e-6);
    }

    #[test]
    fn three_point_clouds_match_exact() {
        let a = cloud(vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 1.1]]);
        let b = cloud(vec![vec![0.9, 0.9], vec![2.0, 0.1], vec![-0.4, 0.6]]);
        for p in [1.0, 2.0] {
            let exact = exact_wasserstein(&a, &b, p).unwrap().0;
            let cfg = SinkhornConfig {
                reg: Some(1e-3),
                ..Default::default()
            };
            let r = sinkhorn_wasserstein(&a, &b, p, &cfg).unwrap();
            assert!(r.distance >= exact - 1e-9);
            assert!((r.distance - exact).abs() <= 0.01 * exact, "p={p} {} vs {exact}", r.distance);
        }
    }

    #[test]
    fn plan_marginals_are_exact_after_rounding() {
        let a = cloud(vec![vec![0.0], vec![1.0], vec![5.0]]);
        let b = cloud(vec![vec![0.5], vec![4.0]]);
        let cfg = SinkhornConfig {
            reg: Some(0.5),
            max_iter: 3,
            ..Default::default()
        };
        let r = sinkhorn_wasserstein(&a, &b, 1.0, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        let (rows, cols) = r.coupling.marginals(3, 2);
        for v in rows {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        for v in cols {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!((r.coupling.recompute_cost(&a, &b) - r.distance).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_reg() {
        let a = cloud(vec![vec![0.0]]);
        let cfg = SinkhornConfig {
            reg: Some(0.0),
            ..Default::default()
        };
        assert!(sinkhorn_wasserstein(&a, &a, 1.0, &cfg).is_err());
    }
}
