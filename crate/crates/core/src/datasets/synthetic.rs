use serde::{Deserialize, Serialize};

use super::{norm, Domain, DomainPath, Label, LabeledSample, ShiftDescriptor};
use crate::error::{invalid, Error, Result};
use crate::seeding::{normal, stream};
use rand::Rng;

/// Centre of the raw two-moons point set; subtracted so rotations act about
/// the middle of the data.
pub const MOONS_CENTER: [f64; 2] = [0.5, 0.25];

/// Centre of the lower (class -1) arc before centring. The upper (class +1)
/// arc is the unit semicircle about the origin.
pub const MOONS_LOWER_CENTER: [f64; 2] = [1.0, 0.5];

/// Base distribution for synthetic paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Two interleaved unit-radius half circles with isotropic Gaussian noise.
    TwoMoons { noise_sigma: f64 },
    /// Two isotropic Gaussian blobs at (+-separation/2, 0, ..., 0).
    Blobs { dim: usize, separation: f64, sigma: f64 },
}

impl Generator {
    /// Raw (un-normalized) draw of `n` samples, labels balanced to within one.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Vec<LabeledSample>> {
        match *self {
            Generator::TwoMoons { noise_sigma } => raw_moons(n, noise_sigma, seed),
            Generator::Blobs {
                dim,
                separation,
                sigma,
            } => raw_blobs(n, dim, separation, sigma, seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::TwoMoons { .. } => "two_moons",
            Generator::Blobs { .. } => "blobs",
        }
    }
}

fn check_noise(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("noise sigma must be a finite non-negative number, got {sigma}")))
    }
}

// Class +1 gets the extra sample when n is odd.
fn class_of(i: usize, n: usize) -> Label {
    if i < n.div_ceil(2) {
        Label::Pos
    } else {
        Label::Neg
    }
}

fn raw_moons(n: usize, noise_sigma: f64, seed: u64) -> Result<Vec<LabeledSample>> {
    if n < 2 {
        return Err(invalid(format!("two moons needs n >= 2, got {n}")));
    }
    check_noise(noise_sigma)?;
    let mut rng = stream(seed, &[0x6d6f6f6e]);
    let samples = (0..n)
        .map(|i| {
            let y = class_of(i, n);
            let theta = rng.gen::<f64>() * std::f64::consts::PI;
            let (px, py) = match y {
                Label::Pos => (theta.cos(), theta.sin()),
                Label::Neg => (
                    MOONS_LOWER_CENTER[0] - theta.cos(),
                    MOONS_LOWER_CENTER[1] - theta.sin(),
                ),
            };
            let (ex, ey) = if noise_sigma > 0.0 {
                (noise_sigma * normal(&mut rng), noise_sigma * normal(&mut rng))
            } else {
                (0.0, 0.0)
            };
            LabeledSample::new(
                vec![px + ex - MOONS_CENTER[0], py + ey - MOONS_CENTER[1]],
                y,
            )
        })
        .collect();
    Ok(samples)
}

fn raw_blobs(n: usize, dim: usize, separation: f64, sigma: f64, seed: u64) -> Result<Vec<LabeledSample>> {
    if n < 2 {
        return Err(invalid(format!("blobs needs n >= 2, got {n}")));
    }
    if dim == 0 {
        return Err(invalid("blobs needs dim >= 1"));
    }
    check_noise(sigma)?;
    let mut rng = stream(seed, &[0x626c6f62]);
    let samples = (0..n)
        .map(|i| {
            let y = class_of(i, n);
            let mut x: Vec<f64> = (0..dim).map(|_| sigma * normal(&mut rng)).collect();
            x[0] += 0.5 * separation * y.value();
            LabeledSample::new(x, y)
        })
        .collect();
    Ok(samples)
}

fn max_norm(samples: &[LabeledSample]) -> f64 {
    samples.iter().map(LabeledSample::norm).fold(0.0, f64::max)
}

fn normalize(samples: Vec<LabeledSample>, divisor: f64, descriptor: ShiftDescriptor) -> Result<Domain> {
    Domain::new(samples, descriptor)?.scaled(divisor)
}

/// Two-moons domain scaled into the unit ball by its own maximum norm.
///
/// Upper arc (label +1) is `(cos t, sin t)`, lower arc (label -1) is
/// `(1 - cos t, 0.5 - sin t)`, `t ~ U[0, pi]`; both are then shifted by
/// `-MOONS_CENTER`, perturbed by `N(0, noise_sigma^2)` and divided by the
/// recorded scale (`descriptor.value`).
pub fn make_two_moons(n: usize, noise_sigma: f64, seed: u64) -> Result<Domain> {
    let raw = raw_moons(n, noise_sigma, seed)?;
    let scale = max_norm(&raw).max(f64::MIN_POSITIVE);
    normalize(raw, scale, ShiftDescriptor::new("two moons", scale))
}

fn rotate_pair(x: &mut [f64], i: usize, j: usize, angle_deg: f64) {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (a, b) = (x[i], x[j]);
    x[i] = c * a - s * b;
    x[j] = s * a + c * b;
}

/// Planar rotation about the origin, counter-clockwise in degrees. Requires d = 2.
pub fn rotate_domain(domain: &Domain, angle_deg: f64) -> Result<Domain> {
    if domain.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: domain.dim(),
        });
    }
    rotate_domain_in_plane(domain, angle_deg, (0, 1))
}

/// Rotation in the coordinate plane spanned by axes `plane.0` and `plane.1`.
pub fn rotate_domain_in_plane(domain: &Domain, angle_deg: f64, plane: (usize, usize)) -> Result<Domain> {
    let (i, j) = plane;
    if i == j || i >= domain.dim() || j >= domain.dim() {
        return Err(invalid(format!(
            "rotation plane ({i}, {j}) is invalid for dimension {}",
            domain.dim()
        )));
    }
    let mut out = domain.map_features(|x| {
        let mut v = x.to_vec();
        rotate_pair(&mut v, i, j, angle_deg);
        v
    })?;
    out.descriptor.text = format!("{} rotated {angle_deg} deg", domain.descriptor.text);
    out.descriptor.value = angle_deg;
    Ok(out)
}

/// Adds `offset` to every sample. No renormalization; the descriptor records
/// the new max norm so any unit-ball violation is visible.
pub fn translate_domain(domain: &Domain, offset: &[f64]) -> Result<Domain> {
    if offset.len() != domain.dim() {
        return Err(invalid(format!(
            "offset has dimension {}, domain has {}",
            offset.len(),
            domain.dim()
        )));
    }
    let mut out = domain.map_features(|x| x.iter().zip(offset).map(|(a, b)| a + b).collect())?;
    out.descriptor.text = format!("{} translated by {:?}", domain.descriptor.text, offset);
    out.descriptor.value = norm(offset);
    Ok(out)
}

fn check_path_args(steps: usize, n: usize) -> Result<()> {
    if steps == 0 {
        return Err(invalid("T must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    Ok(())
}

/// Builds a path whose domain `t` is a fresh draw shifted by `shift(t / T)`.
/// The source decides the normalization scale for the whole path.
fn fresh_draw_path(
    gen: &Generator,
    steps: usize,
    n: usize,
    n_source: usize,
    seed: u64,
    shift: impl Fn(&Domain, f64) -> Result<Domain>,
) -> Result<DomainPath> {
    check_path_args(steps, n)?;
    let source_raw = gen.draw(n_source, crate::seeding::derive_seed(seed, &[0]))?;
    let scale = max_norm(&source_raw).max(f64::MIN_POSITIVE);
    let mut domains = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let raw = if t == 0 {
            source_raw.clone()
        } else {
            gen.draw(n, crate::seeding::derive_seed(seed, &[t as u64]))?
        };
        let base = normalize(raw, scale, ShiftDescriptor::new(gen.name(), 0.0))?;
        domains.push(shift(&base, t as f64 / steps as f64)?);
    }
    DomainPath::new(domains, n, scale)
}

/// Fresh draw of `n` samples divided by an externally chosen `scale`, for
/// held-out evaluation sets that must share a path's normalization.
pub fn draw_scaled(gen: &Generator, n: usize, scale: f64, seed: u64) -> Result<Domain> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("normalization scale must be positive"));
    }
    normalize(gen.draw(n, seed)?, scale, ShiftDescriptor::new(gen.name(), 0.0))
}

/// Fresh draw scaled into the unit ball by its own maximum norm, which is
/// recorded in `descriptor.value`.
pub fn draw_normalized(gen: &Generator, n: usize, seed: u64) -> Result<Domain> {
    let raw = gen.draw(n, seed)?;
    let scale = max_norm(&raw).max(f64::MIN_POSITIVE);
    normalize(raw, scale, ShiftDescriptor::new(gen.name(), scale))
}

/// Rotation path: domain `t` is a fresh draw rotated by
/// `start + (end - start) * t / T` degrees (in the (0, 1) plane).
pub fn make_rotation_path(
    gen: &Generator,
    start_deg: f64,
    end_deg: f64,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<DomainPath> {
    make_rotation_path_with_source(gen, start_deg, end_deg, steps, n, n, seed)
}

pub fn make_rotation_path_with_source(
    gen: &Generator,
    start_deg: f64,
    end_deg: f64,
    steps: usize,
    n: usize,
    n_source: usize,
    seed: u64,
) -> Result<DomainPath> {
    fresh_draw_path(gen, steps, n, n_source, seed, |d, frac| {
        let angle = start_deg + (end_deg - start_deg) * frac;
        let mut out = rotate_domain_in_plane(d, angle, (0, 1))?;
        out.descriptor.text = format!("rotation {angle} deg");
        Ok(out)
    })
}

/// Translation path: domain `t` is a fresh draw translated by `offset * t / T`.
pub fn make_translation_path(
    gen: &Generator,
    offset: &[f64],
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<DomainPath> {
    fresh_draw_path(gen, steps, n, n, seed, |d, frac| {
        let step: Vec<f64> = offset.iter().map(|o| o * frac).collect();
        let mut out = translate_domain(d, &step)?;
        out.descriptor.text = format!("translation {:.6}", norm(&step));
        Ok(out)
    })
}
