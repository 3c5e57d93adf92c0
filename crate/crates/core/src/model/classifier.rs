use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Label;
use crate::error::{invalid, Error, Result};
use crate::seeding::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative; relu'(0) = 0.
    fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Dense layer, weights row-major `out x inp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inp: usize,
    pub out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(inp: usize, out: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inp == 0 || out == 0 {
            return Err(invalid("layer dimensions must be positive"));
        }
        if weights.len() != inp * out || bias.len() != out {
            return Err(invalid(format!(
                "layer {inp}->{out} needs {} weights and {out} biases, got {} and {}",
                inp * out,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            inp,
            out,
            weights,
            bias,
        })
    }

    fn forward(&self, x: &[f64], z: &mut Vec<f64>) {
        z.clear();
        z.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.inp..(o + 1) * self.inp];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

/// Real-valued scorer; the predicted label is `sign(score)` with `sign(0) = +1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Linear { w: Vec<f64>, b: f64 },
    Mlp { layers: Vec<Layer>, activation: Activation },
}

impl Classifier {
    pub fn linear(w: Vec<f64>, b: f64) -> Result<Self> {
        let h = Classifier::Linear { w, b };
        h.validate()?;
        Ok(h)
    }

    pub fn mlp(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        let h = Classifier::Mlp { layers, activation };
        h.validate()?;
        Ok(h)
    }

    /// Seeded linear model with weights uniform in `±1/sqrt(dim)`.
    pub fn init_linear(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        let mut rng = stream(seed, &[0x6c696e]);
        let a = 1.0 / (dim as f64).sqrt();
        let w = (0..dim).map(|_| rng.gen_range(-a..=a)).collect();
        let b = rng.gen_range(-a..=a);
        Ok(Classifier::Linear { w, b })
    }

    /// Seeded MLP `dim -> hidden[0] -> ... -> 1`, every parameter uniform in
    /// `±1/sqrt(fan_in)`.
    pub fn init_mlp(dim: usize, hidden: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if dim == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(invalid("layer widths must be positive"));
        }
        let mut rng = stream(seed, &[0x6d6c70]);
        let mut widths = vec![dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|io| {
                let (inp, out) = (io[0], io[1]);
                let a = 1.0 / (inp as f64).sqrt();
                let weights = (0..inp * out).map(|_| rng.gen_range(-a..=a)).collect();
                let bias = (0..out).map(|_| rng.gen_range(-a..=a)).collect();
                Layer {
                    inp,
                    out,
                    weights,
                    bias,
                }
            })
            .collect();
        Classifier::mlp(layers, activation)
    }

    /// Default architecture: two hidden relu layers of width 32.
    pub fn init_default(dim: usize, seed: u64) -> Result<Self> {
        Self::init_mlp(dim, &[32, 32], Activation::Relu, seed)
    }

    /// A freshly initialized classifier with the same architecture.
    pub fn fresh_like(&self, seed: u64) -> Classifier {
        match self {
            Classifier::Linear { w, .. } => Self::init_linear(w.len(), seed),
            Classifier::Mlp { layers, activation } => {
                let hidden: Vec<usize> = layers[..layers.len() - 1].iter().map(|l| l.out).collect();
                Self::init_mlp(layers[0].inp, &hidden, *activation, seed)
            }
        }
        .expect("shapes of a valid classifier")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Classifier::Linear { w, b } => {
                if w.is_empty() {
                    return Err(invalid("linear model needs at least one weight"));
                }
                if !b.is_finite() {
                    return Err(invalid("non-finite parameter"));
                }
            }
            Classifier::Mlp { layers, .. } => {
                let last = layers.last().ok_or_else(|| invalid("mlp needs at least one layer"))?;
                for l in layers {
                    Layer::new(l.inp, l.out, l.weights.clone(), l.bias.clone())?;
                }
                for pair in layers.windows(2) {
                    if pair[0].out != pair[1].inp {
                        return Err(invalid(format!(
                            "layer shapes do not chain: {} outputs into {} inputs",
                            pair[0].out, pair[1].inp
                        )));
                    }
                }
                if last.out != 1 {
                    return Err(invalid("last layer must have a single output"));
                }
            }
        }
        if !self.is_finite() {
            return Err(invalid("non-finite parameter"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Classifier::Linear { w, .. } => w.len(),
            Classifier::Mlp { layers, .. } => layers[0].inp,
        }
    }

    /// Number of weight layers (1 for a linear model).
    pub fn depth(&self) -> usize {
        match self {
            Classifier::Linear { .. } => 1,
            Classifier::Mlp { layers, .. } => layers.len(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.score(x).map(Label::from_score)
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Linear { w, b } => b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>(),
            Classifier::Mlp { layers, activation } => {
                let mut a = x.to_vec();
                let mut z = Vec::new();
                let last = layers.len() - 1;
                for (l, layer) in layers.iter().enumerate() {
                    layer.forward(&a, &mut z);
                    if l < last {
                        a.clear();
                        a.extend(z.iter().map(|&v| activation.apply(v)));
                    }
                }
                z[0]
            }
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Classifier::Linear { w, .. } => w.len() + 1,
            Classifier::Mlp { layers, .. } => layers.iter().map(|l| l.weights.len() + l.bias.len()).sum(),
        }
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Classifier::Linear { w, b } => {
                let mut p = w.clone();
                p.push(*b);
                p
            }
            Classifier::Mlp { layers, .. } => layers
                .iter()
                .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
                .collect(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        match self {
            Classifier::Linear { w, b } => {
                let d = w.len();
                w.copy_from_slice(&p[..d]);
                *b = p[d];
            }
            Classifier::Mlp { layers, .. } => {
                let mut k = 0;
                for l in layers {
                    let nw = l.weights.len();
                    l.weights.copy_from_slice(&p[k..k + nw]);
                    k += nw;
                    let nb = l.bias.len();
                    l.bias.copy_from_slice(&p[k..k + nb]);
                    k += nb;
                }
            }
        }
        Ok(())
    }

    /// The classifier with every score negated.
    pub fn negated(&self) -> Classifier {
        let mut h = self.clone();
        match &mut h {
            Classifier::Linear { w, b } => {
                w.iter_mut().for_each(|v| *v = -*v);
                *b = -*b;
            }
            Classifier::Mlp { layers, .. } => {
                let last = layers.last_mut().expect("validated mlp");
                last.weights.iter_mut().for_each(|v| *v = -*v);
                last.bias.iter_mut().for_each(|v| *v = -*v);
            }
        }
        h
    }

    /// Adds `scale * d score / d params` at `x` into `grad` and returns the score.
    pub(crate) fn accumulate_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        match self {
            Classifier::Linear { w, b } => {
                let d = w.len();
                for (g, v) in grad[..d].iter_mut().zip(x) {
                    *g += scale * v;
                }
                grad[d] += scale;
                b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
            }
            Classifier::Mlp { layers, activation } => {
                let last = layers.len() - 1;
                // acts[l] is the input to layer l; pre[l] its pre-activation
                let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
                let mut pre: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
                acts.push(x.to_vec());
                for (l, layer) in layers.iter().enumerate() {
                    let mut z = Vec::with_capacity(layer.out);
                    layer.forward(&acts[l], &mut z);
                    if l < last {
                        acts.push(z.iter().map(|&v| activation.apply(v)).collect());
                    }
                    pre.push(z);
                }
                let score = pre[last][0];
                let offsets = layer_offsets(layers);
                let mut delta = vec![scale];
                for l in (0..layers.len()).rev() {
                    let layer = &layers[l];
                    let off = offsets[l];
                    let a = &acts[l];
                    for (o, &dl) in delta.iter().enumerate() {
                        if dl != 0.0 {
                            let g = &mut grad[off + o * layer.inp..off + (o + 1) * layer.inp];
                            for (gi, ai) in g.iter_mut().zip(a) {
                                *gi += dl * ai;
                            }
                        }
                        grad[off + layer.weights.len() + o] += dl;
                    }
                    if l > 0 {
                        let mut next = vec![0.0; layer.inp];
                        for (o, &dl) in delta.iter().enumerate() {
                            if dl != 0.0 {
                                let row = &layer.weights[o * layer.inp..(o + 1) * layer.inp];
                                for (n, w) in next.iter_mut().zip(row) {
                                    *n += dl * w;
                                }
                            }
                        }
                        for (n, z) in next.iter_mut().zip(&pre[l - 1]) {
                            *n *= activation.deriv(*z);
                        }
                        delta = next;
                    }
                }
                score
            }
        }
    }

    /// Sign pattern of the hidden relu pre-activations at `x`; empty otherwise.
    pub(crate) fn relu_pattern(&self, x: &[f64]) -> Vec<bool> {
        match self {
            Classifier::Mlp {
                layers,
                activation: Activation::Relu,
            } => {
                let mut a = x.to_vec();
                let mut z = Vec::new();
                let mut pattern = Vec::new();
                for layer in &layers[..layers.len() - 1] {
                    layer.forward(&a, &mut z);
                    pattern.extend(z.iter().map(|&v| v > 0.0));
                    a.clear();
                    a.extend(z.iter().map(|&v| v.max(0.0)));
                }
                pattern
            }
            _ => Vec::new(),
        }
    }
}

fn layer_offsets(layers: &[Layer]) -> Vec<usize> {
    let mut offs = Vec::with_capacity(layers.len());
    let mut k = 0;
    for l in layers {
        offs.push(k);
        k += l.weights.len() + l.bias.len();
    }
    offs
}
