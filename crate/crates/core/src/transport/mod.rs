//! Empirical optimal transport: exact and entropic p-Wasserstein distances,
//! displacement-interpolation paths and per-step shift profiles.

mod assignment;
mod paths;
mod sinkhorn;

pub use assignment::min_cost_assignment;
pub use paths::{
    geodesic_coupling, geodesic_interpolate, make_detour_path, make_geodesic_path, path_shift_profile, ShiftProfile,
};
pub use sinkhorn::{sinkhorn_wasserstein, SinkhornConfig, SinkhornResult};

use rand::seq::index::sample;

use crate::datasets::Domain;
use crate::error::{invalid, Error, Result};
use crate::seeding::stream;

/// Uniformly weighted point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let d = points
            .first()
            .ok_or_else(|| invalid("point cloud is empty"))?
            .len();
        if d == 0 {
            return Err(invalid("points must have at least one coordinate"));
        }
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        Ok(Self { points })
    }

    /// Feature cloud of a domain (labels ignored).
    pub fn from_features(domain: &Domain) -> Self {
        Self {
            points: domain.unlabeled().iter().map(<[f64]>::to_vec).collect(),
        }
    }

    /// Joint cloud `(x, label_weight * y)` built from evaluation labels.
    pub fn from_joint(domain: &Domain, label_weight: f64) -> Self {
        Self {
            points: domain
                .evaluation_samples()
                .iter()
                .map(|s| {
                    let mut v = s.x.clone();
                    v.push(label_weight * s.y.value());
                    v
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    fn subset(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

/// `||a - b||^p`, with the usual shortcuts for p = 1 and p = 2.
pub(crate) fn ground_cost(a: &[f64], b: &[f64], p: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.sqrt().powf(p)
    }
}

pub(crate) fn cost_matrix(a: &PointCloud, b: &PointCloud, p: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for x in a.points() {
        for y in b.points() {
            c.push(ground_cost(x, y, p));
        }
    }
    c
}

fn root(v: f64, p: f64) -> f64 {
    let v = v.max(0.0);
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v.sqrt()
    } else {
        v.powf(1.0 / p)
    }
}

/// Transport plan representation.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportPlan {
    /// Pairs `(i, j)`, each carrying mass `1 / pairs.len()`.
    Assignment(Vec<(usize, usize)>),
    /// Dense `rows x cols` row-major mass matrix.
    Dense {
        rows: usize,
        cols: usize,
        mass: Vec<f64>,
    },
}

/// Records that the larger cloud was subsampled (without replacement) to
/// match the smaller one before an exact solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    /// True when the first cloud (`a`) was subsampled.
    pub first: bool,
    pub original_len: usize,
    pub kept: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub plan: TransportPlan,
    /// Realized transport cost `(sum gamma_ij ||a_i - b_j||^p)^(1/p)`.
    pub cost: f64,
    pub p: f64,
    pub subsample: Option<Subsample>,
}

impl Coupling {
    /// Permutation `i -> j` when the plan is a full equal-size assignment.
    pub fn permutation(&self) -> Option<Vec<usize>> {
        match &self.plan {
            TransportPlan::Assignment(pairs) if self.subsample.is_none() => {
                let mut perm = vec![usize::MAX; pairs.len()];
                for &(i, j) in pairs {
                    *perm.get_mut(i)? = j;
                }
                Some(perm)
            }
            _ => None,
        }
    }

    /// `(i, j, mass)` triples with non-zero mass, row-major order.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        match &self.plan {
            TransportPlan::Assignment(pairs) => {
                let m = 1.0 / pairs.len() as f64;
                let mut t: Vec<_> = pairs.iter().map(|&(i, j)| (i, j, m)).collect();
                t.sort_by_key(|&(i, j, _)| (i, j));
                t
            }
            TransportPlan::Dense { cols, mass, .. } => mass
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(k, &w)| (k / cols, k % cols, w))
                .collect(),
        }
    }

    /// Row and column sums of the plan, sized by the original clouds.
    pub fn marginals(&self, rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
        let mut r = vec![0.0; rows];
        let mut c = vec![0.0; cols];
        for (i, j, w) in self.triples() {
            r[i] += w;
            c[j] += w;
        }
        (r, c)
    }

    /// Recomputes the cost from the plan and the clouds.
    pub fn recompute_cost(&self, a: &PointCloud, b: &PointCloud) -> f64 {
        let total: f64 = self
            .triples()
            .into_iter()
            .map(|(i, j, w)| w * ground_cost(&a.points()[i], &b.points()[j], self.p))
            .sum();
        root(total, self.p)
    }

    /// CSV lines `i,j,mass` with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,mass\n");
        for (i, j, w) in self.triples() {
            s.push_str(&format!("{i},{j},{}\n", crate::numfmt::sig17(w)));
        }
        s
    }
}

pub(crate) fn check_pair(a: &PointCloud, b: &PointCloud, p: f64) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("point clouds must be non-empty"));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be a finite number >= 1, got {p}")));
    }
    Ok(())
}

/// Exact p-Wasserstein distance between two uniform empirical measures.
///
/// Equal sizes are solved as a minimum-cost perfect assignment on
/// `||a_i - b_j||^p`. When sizes differ, the larger cloud is subsampled
/// without replacement (seeded by the two sizes) and the coupling records it.
pub fn exact_wasserstein(a: &PointCloud, b: &PointCloud, p: f64) -> Result<(f64, Coupling)> {
    check_pair(a, b, p)?;
    let (n, m) = (a.len(), b.len());
    let (sub, aa, bb);
    if n == m {
        sub = None;
        aa = None;
        bb = None;
    } else {
        let first = n > m;
        let (big, small) = if first { (n, m) } else { (m, n) };
        let mut rng = stream(0x5375_6273, &[big as u64, small as u64]);
        let mut kept = sample(&mut rng, big, small).into_vec();
        kept.sort_unstable();
        if first {
            aa = Some(a.subset(&kept));
            bb = None;
        } else {
            aa = None;
            bb = Some(b.subset(&kept));
        }
        sub = Some(Subsample {
            first,
            original_len: big,
            kept,
        });
    }
    let ea = aa.as_ref().unwrap_or(a);
    let eb = bb.as_ref().unwrap_or(b);
    let k = ea.len();
    let c = cost_matrix(ea, eb, p);
    let perm = min_cost_assignment(&c, k);
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[i * k + j]).sum();
    let dist = root(total / k as f64, p);

    let pairs = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| match &sub {
            None => (i, j),
            Some(s) if s.first => (s.kept[i], j),
            Some(s) => (i, s.kept[j]),
        })
        .collect();
    Ok((
        dist,
        Coupling {
            plan: TransportPlan::Assignment(pairs),
            cost: dist,
            p,
            subsample: sub,
        },
    ))
}

/// Shorthand for the exact distance on two domains' feature clouds.
pub fn domain_distance(a: &Domain, b: &Domain, p: f64) -> Result<f64> {
    exact_wasserstein(&PointCloud::from_features(a), &PointCloud::from_features(b), p).map(|r| r.0)
}
