use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::Label;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Logistic,
    Hinge,
    Ramp,
    Squared,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "cross_entropy" => Ok(LossKind::Logistic),
            "hinge" => Ok(LossKind::Hinge),
            "ramp" => Ok(LossKind::Ramp),
            "squared" => Ok(LossKind::Squared),
            other => Err(invalid(format!("unknown loss kind `{other}`"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
            LossKind::Ramp => "ramp",
            LossKind::Squared => "squared",
        };
        f.write_str(s)
    }
}

/// Fitting target for one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Hard(Label),
    /// Real-valued target score; only meaningful for the squared loss.
    Soft(f64),
}

/// Loss function with its Lipschitz constant.
///
/// Margin losses act on `z = y * score`:
/// logistic `ln(1 + e^-z)`, hinge `max(0, 1 - z)`, ramp `min(1, max(0, 1 - z))`,
/// all 1-Lipschitz. The squared loss acts on the residual `r = score - target`
/// and is quadratic for `|r| <= clip`, continued linearly beyond, which keeps
/// it `2 * clip`-Lipschitz.
///
/// At kinks the derivative is the one-sided value from the sloped side: hinge
/// uses `-y` at `z = 1`, ramp uses `-y` on the closed interval `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default = "default_clip")]
    pub clip: f64,
}

fn default_clip() -> f64 {
    2.0
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            clip: default_clip(),
        }
    }

    pub fn logistic() -> Self {
        Self::new(LossKind::Logistic)
    }

    pub fn hinge() -> Self {
        Self::new(LossKind::Hinge)
    }

    pub fn ramp() -> Self {
        Self::new(LossKind::Ramp)
    }

    pub fn squared() -> Self {
        Self::new(LossKind::Squared)
    }

    pub fn rho(&self) -> f64 {
        match self.kind {
            LossKind::Squared => 2.0 * self.clip,
            _ => 1.0,
        }
    }

    pub fn accepts_soft_targets(&self) -> bool {
        self.kind == LossKind::Squared
    }

    pub fn check_target(&self, target: &Target) -> Result<()> {
        match target {
            Target::Soft(v) if !self.accepts_soft_targets() => Err(invalid(format!(
                "soft target {v} is only supported by the squared loss, not {}",
                self.kind
            ))),
            Target::Soft(v) if !v.is_finite() => Err(invalid("soft target must be finite")),
            _ => Ok(()),
        }
    }

    fn target_value(target: &Target) -> f64 {
        match *target {
            Target::Hard(y) => y.value(),
            Target::Soft(v) => v,
        }
    }

    /// Loss value. Soft targets on margin losses use `sign(target)`.
    pub fn eval_target(&self, score: f64, target: &Target) -> f64 {
        let t = Self::target_value(target);
        match self.kind {
            LossKind::Squared => {
                let r = score - t;
                if r.abs() <= self.clip {
                    r * r
                } else {
                    2.0 * self.clip * r.abs() - self.clip * self.clip
                }
            }
            _ => {
                let y = if t >= 0.0 { 1.0 } else { -1.0 };
                margin_loss(self.kind, y * score)
            }
        }
    }

    pub fn eval(&self, score: f64, y: Label) -> f64 {
        self.eval_target(score, &Target::Hard(y))
    }

    /// Derivative with respect to the score.
    pub fn grad_target(&self, score: f64, target: &Target) -> f64 {
        let t = Self::target_value(target);
        match self.kind {
            LossKind::Squared => {
                let r = score - t;
                if r.abs() <= self.clip {
                    2.0 * r
                } else {
                    2.0 * self.clip * r.signum()
                }
            }
            _ => {
                let y = if t >= 0.0 { 1.0 } else { -1.0 };
                y * margin_grad(self.kind, y * score)
            }
        }
    }

    pub fn grad(&self, score: f64, y: Label) -> f64 {
        self.grad_target(score, &Target::Hard(y))
    }

    /// Index of the smooth piece containing `score`, used to keep finite
    /// differences away from kinks.
    pub fn region(&self, score: f64, target: &Target) -> u8 {
        let t = Self::target_value(target);
        match self.kind {
            LossKind::Logistic => 0,
            LossKind::Hinge => u8::from(t.signum() * score >= 1.0),
            LossKind::Ramp => {
                let z = if t >= 0.0 { score } else { -score };
                if z <= 0.0 {
                    0
                } else if z < 1.0 {
                    1
                } else {
                    2
                }
            }
            LossKind::Squared => {
                let r = score - t;
                if r < -self.clip {
                    0
                } else if r <= self.clip {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Distance from `score` to the nearest kink (infinite for smooth losses).
    pub fn kink_distance(&self, score: f64, target: &Target) -> f64 {
        let t = Self::target_value(target);
        let y = if t >= 0.0 { 1.0 } else { -1.0 };
        match self.kind {
            LossKind::Logistic => f64::INFINITY,
            LossKind::Hinge => (y * score - 1.0).abs(),
            LossKind::Ramp => (y * score).abs().min((y * score - 1.0).abs()),
            LossKind::Squared => ((score - t).abs() - self.clip).abs(),
        }
    }
}

fn margin_loss(kind: LossKind, z: f64) -> f64 {
    match kind {
        // ln(1 + e^-z), stable for both signs
        LossKind::Logistic => {
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        }
        LossKind::Hinge => (1.0 - z).max(0.0),
        LossKind::Ramp => (1.0 - z).clamp(0.0, 1.0),
        LossKind::Squared => unreachable!("squared loss is not a margin loss"),
    }
}

/// d loss / dz.
fn margin_grad(kind: LossKind, z: f64) -> f64 {
    match kind {
        LossKind::Logistic => {
            // -1 / (1 + e^z)
            if z > 0.0 {
                let e = (-z).exp();
                -e / (1.0 + e)
            } else {
                -1.0 / (1.0 + z.exp())
            }
        }
        LossKind::Hinge => {
            if z <= 1.0 {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Ramp => {
            if (0.0..=1.0).contains(&z) {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Squared => unreachable!("squared loss is not a margin loss"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        let ramp = LossSpec::ramp();
        assert_eq!(ramp.eval(2.0, Label::Pos), 0.0);
        assert_eq!(ramp.eval(0.0, Label::Pos), 1.0);
        assert_eq!(ramp.eval(0.5, Label::Pos), 0.5);
        assert_eq!(ramp.eval(-3.0, Label::Pos), 1.0);
        let log = LossSpec::logistic();
        assert!((log.eval(0.0, Label::Pos) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log.eval(0.0, Label::Neg) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log.eval(800.0, Label::Neg).is_finite());
        assert_eq!(LossSpec::hinge().eval(0.25, Label::Neg), 1.25);
        assert_eq!(LossSpec::squared().eval(0.5, Label::Pos), 0.25);
    }

    #[test]
    fn kink_conventions() {
        let hinge = LossSpec::hinge();
        assert_eq!(hinge.grad(1.0, Label::Pos), -1.0);
        assert_eq!(hinge.grad(1.0 + 1e-12, Label::Pos), 0.0);
        let ramp = LossSpec::ramp();
        assert_eq!(ramp.grad(0.0, Label::Pos), -1.0);
        assert_eq!(ramp.grad(1.0, Label::Pos), -1.0);
        assert_eq!(ramp.grad(-0.1, Label::Pos), 0.0);
        assert_eq!(ramp.grad(1.5, Label::Pos), 0.0);
        assert_eq!(ramp.grad(-0.5, Label::Neg), 1.0);
    }

    #[test]
    fn soft_targets_only_for_squared() {
        assert!(LossSpec::squared().check_target(&Target::Soft(0.3)).is_ok());
        assert!(LossSpec::logistic().check_target(&Target::Soft(0.3)).is_err());
        assert!(LossSpec::hinge().check_target(&Target::Hard(Label::Neg)).is_ok());
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("Ramp".parse::<LossKind>().unwrap(), LossKind::Ramp);
        assert!("exotic".parse::<LossKind>().is_err());
    }

    #[test]
    fn lipschitz_constants_hold_on_many_pairs() {
        use rand::Rng;
        let mut rng = crate::seeding::stream(11, &[]);
        for loss in [LossSpec::logistic(), LossSpec::hinge(), LossSpec::ramp(), LossSpec::squared()] {
            for _ in 0..100_000 {
                let s: f64 = rng.gen_range(-6.0..6.0);
                let s2: f64 = rng.gen_range(-6.0..6.0);
                let y = if rng.gen::<bool>() { Label::Pos } else { Label::Neg };
                let lhs = (loss.eval(s, y) - loss.eval(s2, y)).abs();
                // analytic constants; the 1e-15 absorbs rounding in the loss itself
                assert!(lhs <= loss.rho() * (s - s2).abs() + 1e-15, "{loss:?} {s} {s2}");
            }
        }
    }

    proptest! {
        #[test]
        fn gradient_matches_difference_quotient(s in -5.0f64..5.0, pos in any::<bool>(), k in 0usize..4) {
            let loss = [LossSpec::logistic(), LossSpec::hinge(), LossSpec::ramp(), LossSpec::squared()][k];
            let y = if pos { Label::Pos } else { Label::Neg };
            let h = 1e-6;
            prop_assume!(loss.kink_distance(s, &Target::Hard(y)) > 10.0 * h);
            let fd = (loss.eval(s + h, y) - loss.eval(s - h, y)) / (2.0 * h);
            prop_assert!((fd - loss.grad(s, y)).abs() < 1e-6);
        }
    }
}
