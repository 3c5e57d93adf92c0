use rayon::prelude::*;

use super::{exact_wasserstein, Coupling, PointCloud, TransportPlan};
use crate::datasets::{Domain, DomainPath, Label, LabeledSample, ShiftDescriptor};
use crate::error::{invalid, Result};
use crate::numfmt::sig17;
use crate::seeding::{normal, stream};

/// Per-step shifts `Delta_t = W_p(mu_{t-1}, mu_t)` along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftProfile {
    pub deltas: Vec<f64>,
    /// Average shift per step.
    pub delta_avg: f64,
    /// `T * delta_avg`.
    pub path_length: f64,
    pub p: f64,
    /// Measured on joint `(x, label_weight * y)` clouds instead of features.
    pub joint: bool,
}

impl ShiftProfile {
    pub fn steps(&self) -> usize {
        self.deltas.len()
    }

    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,delta_t\n");
        for (k, d) in self.deltas.iter().enumerate() {
            s.push_str(&format!("{},{}\n", k + 1, sig17(*d)));
        }
        s.push_str(&format!("mean,{}\n", sig17(self.delta_avg)));
        s.push_str(&format!("total,{}\n", sig17(self.path_length)));
        s
    }
}

/// Exact W_p between every pair of consecutive domains. Pairs are solved in
/// parallel and collected in index order.
pub fn path_shift_profile(path: &DomainPath, p: f64, joint: bool, label_weight: f64) -> Result<ShiftProfile> {
    if !(label_weight >= 0.0 && label_weight.is_finite()) {
        return Err(invalid("label weight must be finite and non-negative"));
    }
    let clouds: Vec<PointCloud> = path
        .domains()
        .iter()
        .map(|d| {
            if joint {
                PointCloud::from_joint(d, label_weight)
            } else {
                PointCloud::from_features(d)
            }
        })
        .collect();
    let deltas = (1..clouds.len())
        .into_par_iter()
        .map(|t| exact_wasserstein(&clouds[t - 1], &clouds[t], p).map(|r| r.0))
        .collect::<Result<Vec<f64>>>()?;
    let steps = deltas.len() as f64;
    let delta_avg = deltas.iter().sum::<f64>() / steps;
    Ok(ShiftProfile {
        deltas,
        delta_avg,
        path_length: delta_avg * steps,
        p,
        joint,
    })
}

fn indices_with(domain: &Domain, label: Label) -> Vec<usize> {
    domain
        .evaluation_samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.y == label)
        .map(|(i, _)| i)
        .collect()
}

/// Optimal coupling used to build geodesic paths.
///
/// With `class_conditional`, each label is coupled separately (using the
/// evaluation labels of both domains); classes of unequal size are
/// subsampled inside the exact solver and the returned flag is set.
pub fn geodesic_coupling(source: &Domain, target: &Domain, p: f64, class_conditional: bool) -> Result<(Coupling, bool)> {
    let a = PointCloud::from_features(source);
    let b = PointCloud::from_features(target);
    if !class_conditional {
        let (_, c) = exact_wasserstein(&a, &b, p)?;
        let resampled = c.subsample.is_some();
        return Ok((c, resampled));
    }
    let mut pairs = Vec::new();
    let mut resampled = false;
    for label in [Label::Neg, Label::Pos] {
        let ia = indices_with(source, label);
        let ib = indices_with(target, label);
        if ia.is_empty() && ib.is_empty() {
            continue;
        }
        if ia.is_empty() || ib.is_empty() {
            return Err(invalid(format!("class {label:?} is missing from one endpoint")));
        }
        let ca = PointCloud::new(ia.iter().map(|&i| a.points()[i].clone()).collect())?;
        let cb = PointCloud::new(ib.iter().map(|&j| b.points()[j].clone()).collect())?;
        let (_, c) = exact_wasserstein(&ca, &cb, p)?;
        resampled |= c.subsample.is_some();
        if let TransportPlan::Assignment(ps) = &c.plan {
            pairs.extend(ps.iter().map(|&(i, j)| (ia[i], ib[j])));
        }
    }
    pairs.sort_unstable();
    let mut coupling = Coupling {
        plan: TransportPlan::Assignment(pairs),
        cost: 0.0,
        p,
        subsample: None,
    };
    coupling.cost = coupling.recompute_cost(&a, &b);
    Ok((coupling, resampled))
}

fn assignment_pairs(coupling: &Coupling) -> Result<&[(usize, usize)]> {
    match &coupling.plan {
        TransportPlan::Assignment(p) => Ok(p),
        TransportPlan::Dense { .. } => Err(invalid("displacement interpolation needs an assignment coupling")),
    }
}

/// Displacement interpolation at time `t`: pair `(i, j)` becomes
/// `(1 - t) * x_i + t * x'_j`. Labels come from the source sample; under
/// `class_conditional` every pair must share its label, otherwise the
/// carried label is a heuristic and the descriptor says so.
pub fn geodesic_interpolate(
    source: &Domain,
    target: &Domain,
    t: f64,
    coupling: &Coupling,
    class_conditional: bool,
) -> Result<Domain> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("interpolation time must lie in [0, 1], got {t}")));
    }
    let xs = source.evaluation_samples();
    let ys = target.evaluation_samples();
    let pairs = assignment_pairs(coupling)?;
    let mut samples = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let (a, b) = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(invalid(format!("coupling pair ({i}, {j}) is out of range"))),
        };
        if class_conditional && a.y != b.y {
            return Err(invalid(format!("pair ({i}, {j}) crosses classes")));
        }
        let x = a.x.iter().zip(&b.x).map(|(u, v)| (1.0 - t) * u + t * v).collect();
        samples.push(LabeledSample::new(x, a.y));
    }
    let text = if class_conditional {
        format!("geodesic t={t}")
    } else {
        format!("geodesic t={t} (labels carried from source)")
    };
    Domain::new(samples, ShiftDescriptor::new(text, t))
}

fn check_geodesic_args(source: &Domain, target: &Domain, steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(invalid("T must be at least 1"));
    }
    if source.dim() != target.dim() {
        return Err(crate::error::Error::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    Ok(())
}

fn build_path(
    source: &Domain,
    target: &Domain,
    steps: usize,
    coupling: &Coupling,
    class_conditional: bool,
    displace: impl Fn(usize) -> Option<Vec<f64>>,
) -> Result<DomainPath> {
    let mut domains = Vec::with_capacity(steps + 1);
    domains.push(source.clone());
    for t in 1..steps {
        let mut d = geodesic_interpolate(source, target, t as f64 / steps as f64, coupling, class_conditional)?;
        if let Some(off) = displace(t) {
            let text = format!("{} + detour {:.6}", d.descriptor.text, crate::datasets::norm(&off));
            let value = d.descriptor.value;
            d = crate::datasets::translate_domain(&d, &off)?;
            d.descriptor.text = text;
            d.descriptor.value = value;
        }
        domains.push(d);
    }
    domains.push(target.clone());
    let n = assignment_pairs(coupling)?.len();
    DomainPath::new(domains, n, 1.0)
}

/// Path of T + 1 domains at times t / T along the displacement interpolation
/// of an optimal coupling. Endpoints are the given domains themselves.
/// Domains are assumed to be in unit-ball coordinates already, so the
/// recorded normalization scale is 1.
pub fn make_geodesic_path(source: &Domain, target: &Domain, steps: usize, class_conditional: bool, p: f64) -> Result<DomainPath> {
    check_geodesic_args(source, target, steps)?;
    let (coupling, _) = geodesic_coupling(source, target, p, class_conditional)?;
    build_path(source, target, steps, &coupling, class_conditional, |_| None)
}

/// Geodesic path whose interior domains are translated by
/// `detour * sin(pi t / T) * u`, with `u` a seeded unit vector orthogonal to
/// the mean displacement between the endpoints. Endpoints are untouched.
pub fn make_detour_path(
    source: &Domain,
    target: &Domain,
    steps: usize,
    detour: f64,
    seed: u64,
    p: f64,
    class_conditional: bool,
) -> Result<DomainPath> {
    check_geodesic_args(source, target, steps)?;
    if steps < 2 {
        return Err(invalid("a detour needs T >= 2 (at least one interior domain)"));
    }
    if !(detour >= 0.0 && detour.is_finite()) {
        return Err(invalid("detour magnitude must be finite and non-negative"));
    }
    let (coupling, _) = geodesic_coupling(source, target, p, class_conditional)?;
    let u = detour_direction(source, target, &coupling, seed)?;
    build_path(source, target, steps, &coupling, class_conditional, |t| {
        if detour == 0.0 {
            return None;
        }
        let bump = detour * (std::f64::consts::PI * t as f64 / steps as f64).sin();
        Some(u.iter().map(|v| bump * v).collect())
    })
}

fn detour_direction(source: &Domain, target: &Domain, coupling: &Coupling, seed: u64) -> Result<Vec<f64>> {
    let d = source.dim();
    let pairs = assignment_pairs(coupling)?;
    let xs = source.evaluation_samples();
    let ys = target.evaluation_samples();
    let mut mean = vec![0.0; d];
    for &(i, j) in pairs {
        for k in 0..d {
            mean[k] += (ys[j].x[k] - xs[i].x[k]) / pairs.len() as f64;
        }
    }
    let mut rng = stream(seed, &[0x6465_746f]);
    let raw: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let mm: f64 = mean.iter().map(|v| v * v).sum();
    let mut u = raw.clone();
    if mm > 1e-24 {
        let proj: f64 = raw.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>() / mm;
        u.iter_mut().zip(&mean).for_each(|(v, m)| *v -= proj * m);
    }
    let mut nu = crate::datasets::norm(&u);
    if nu < 1e-12 {
        // no orthogonal complement (d = 1)
        u = raw;
        nu = crate::datasets::norm(&u);
    }
    Ok(u.into_iter().map(|v| v / nu).collect())
}
