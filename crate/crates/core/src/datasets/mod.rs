//! Domains, domain paths and their generators.
//!
//! Domain 0 of a [`DomainPath`] is the labeled source. Every later domain is
//! adaptation data: learners reach it through [`UnlabeledView`], which has no
//! label accessor. Ground-truth labels stay attached for evaluation and are
//! only reachable through [`Domain::evaluation_samples`].

mod container;
mod csv_split;
mod synthetic;

pub use container::{read_path, write_path};
pub use csv_split::{load_csv_path, CsvSplit, CsvSplitReport};
pub use synthetic::{
    draw_normalized, draw_scaled, make_rotation_path, make_rotation_path_with_source, make_translation_path, make_two_moons, rotate_domain,
    rotate_domain_in_plane, translate_domain, Generator, MOONS_CENTER, MOONS_LOWER_CENTER,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Binary label in {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    /// sign(score), with sign(0) = +1.
    pub fn from_score(score: f64) -> Label {
        if score >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn from_value(v: f64) -> Result<Label> {
        if v == 1.0 {
            Ok(Label::Pos)
        } else if v == -1.0 {
            Ok(Label::Neg)
        } else {
            Err(invalid(format!("label must be -1 or +1, got {v}")))
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: Label,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: Label) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.x)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// What shifted this domain, and by how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDescriptor {
    pub text: String,
    /// Numeric shift parameter (angle in degrees, offset magnitude, sort key...).
    pub value: f64,
    /// Largest sample norm after normalization. Above 1 means the unit-ball
    /// assumption is violated for this domain.
    pub max_norm: f64,
}

impl ShiftDescriptor {
    pub fn new(text: impl Into<String>, value: f64) -> Self {
        Self {
            text: text.into(),
            value,
            max_norm: f64::NAN,
        }
    }

    pub fn outside_unit_ball(&self) -> bool {
        self.max_norm > 1.0 + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    samples: Vec<LabeledSample>,
    pub descriptor: ShiftDescriptor,
    labels_visible: bool,
}

impl Domain {
    /// Builds a labeled domain. Samples must be non-empty and share one dimension.
    pub fn new(samples: Vec<LabeledSample>, mut descriptor: ShiftDescriptor) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| invalid("a domain needs at least one sample"))?;
        let d = first.x.len();
        if d == 0 {
            return Err(invalid("samples must have at least one feature"));
        }
        if let Some(bad) = samples.iter().find(|s| s.x.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.x.len(),
            });
        }
        if samples.iter().any(|s| s.x.iter().any(|v| !v.is_finite())) {
            return Err(invalid("non-finite feature value"));
        }
        descriptor.max_norm = samples.iter().map(LabeledSample::norm).fold(0.0, f64::max);
        Ok(Self {
            samples,
            descriptor,
            labels_visible: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].x.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels_visible(&self) -> bool {
        self.labels_visible
    }

    pub fn with_hidden_labels(mut self) -> Self {
        self.labels_visible = false;
        self
    }

    pub fn with_visible_labels(mut self) -> Self {
        self.labels_visible = true;
        self
    }

    /// Labeled samples for training. Fails when the labels are hidden.
    pub fn labeled(&self) -> Result<&[LabeledSample]> {
        if self.labels_visible {
            Ok(&self.samples)
        } else {
            Err(Error::LabelsHidden(format!(
                "domain `{}` (adaptation data)",
                self.descriptor.text
            )))
        }
    }

    /// Ground-truth samples for scoring only. Never feed these to a learner.
    pub fn evaluation_samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn unlabeled(&self) -> UnlabeledView<'_> {
        UnlabeledView {
            samples: &self.samples,
        }
    }

    /// Applies `f` to every feature vector, keeping labels and descriptor text.
    pub(crate) fn map_features(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Domain> {
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample::new(f(&s.x), s.y))
            .collect();
        let mut out = Domain::new(samples, self.descriptor.clone())?;
        out.labels_visible = self.labels_visible;
        Ok(out)
    }

    pub(crate) fn scaled(&self, divisor: f64) -> Result<Domain> {
        self.map_features(|x| x.iter().map(|v| v / divisor).collect())
    }

    pub fn max_norm(&self) -> f64 {
        self.descriptor.max_norm
    }
}

/// Adaptation-facing view of a domain: features only.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledView<'a> {
    samples: &'a [LabeledSample],
}

impl<'a> UnlabeledView<'a> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.samples[i].x
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.samples.iter().map(|s| s.x.as_slice())
    }
}

/// An ordered sequence of T+1 domains, source first.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPath {
    domains: Vec<Domain>,
    n_per_domain: usize,
    normalization_scale: f64,
}

impl DomainPath {
    /// Assembles a path. The source keeps its labels visible; every later
    /// domain is switched to hidden labels. Intermediate domains (1..T-1)
    /// must hold exactly `n_per_domain` samples; the target may differ only
    /// for tabular splits, where its size is chosen separately.
    pub fn new(domains: Vec<Domain>, n_per_domain: usize, normalization_scale: f64) -> Result<Self> {
        if domains.len() < 2 {
            return Err(invalid("a path needs a source and at least one more domain"));
        }
        if n_per_domain == 0 {
            return Err(invalid("n_per_domain must be positive"));
        }
        if !(normalization_scale > 0.0 && normalization_scale.is_finite()) {
            return Err(invalid("normalization scale must be positive"));
        }
        let d = domains[0].dim();
        let last = domains.len() - 1;
        for (t, dom) in domains.iter().enumerate() {
            if dom.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: dom.dim(),
                });
            }
            if t >= 1 && t < last && dom.len() != n_per_domain {
                return Err(invalid(format!(
                    "domain {t} has {} samples, expected {n_per_domain}",
                    dom.len()
                )));
            }
        }
        let domains = domains
            .into_iter()
            .enumerate()
            .map(|(t, d)| if t == 0 { d.with_visible_labels() } else { d.with_hidden_labels() })
            .collect();
        Ok(Self {
            domains,
            n_per_domain,
            normalization_scale,
        })
    }

    /// Number of adaptation steps T.
    pub fn steps(&self) -> usize {
        self.domains.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.domains[0].dim()
    }

    pub fn n_per_domain(&self) -> usize {
        self.n_per_domain
    }

    pub fn normalization_scale(&self) -> f64 {
        self.normalization_scale
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn domain(&self, t: usize) -> &Domain {
        &self.domains[t]
    }

    pub fn source(&self) -> &Domain {
        &self.domains[0]
    }

    pub fn target(&self) -> &Domain {
        &self.domains[self.domains.len() - 1]
    }
}
