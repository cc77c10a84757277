use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Mae,
    Huber(f64),
    SmoothL1,
}

impl LossKind {
    /// Per-residual loss `ℓ(r)` with `r = pred − target`.
    #[inline]
    pub fn value(self, r: f64) -> f64 {
        match self {
            LossKind::Mse => r * r,
            LossKind::Mae => r.abs(),
            LossKind::Huber(delta) => {
                let a = r.abs();
                if a <= delta {
                    0.5 * r * r
                } else {
                    delta * (a - 0.5 * delta)
                }
            }
            LossKind::SmoothL1 => {
                let a = r.abs();
                if a < 1.0 {
                    0.5 * r * r
                } else {
                    a - 0.5
                }
            }
        }
    }

    /// `dℓ/dr`.
    #[inline]
    pub fn derivative(self, r: f64) -> f64 {
        match self {
            LossKind::Mse => 2.0 * r,
            LossKind::Mae => {
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Huber(delta) => r.clamp(-delta, delta),
            LossKind::SmoothL1 => r.clamp(-1.0, 1.0),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            LossKind::Huber(d) if !(d > 0.0 && d.is_finite()) => {
                Err(Error::InvalidArgument(format!("huber delta must be positive, got {d}")))
            }
            _ => Ok(()),
        }
    }
}

/// Mean-reduced loss and its gradient with respect to `pred`.
pub fn loss_and_grad(kind: LossKind, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    kind.validate()?;
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("loss over an empty batch".into()));
    }
    let inv = 1.0 / pred.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let r = p - t;
            total += kind.value(r);
            kind.derivative(r) * inv
        })
        .collect();
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_branches() {
        let h = LossKind::Huber(1.0);
        assert_eq!(h.value(0.5), 0.125);
        assert_eq!(h.value(2.0), 1.5);
        assert_eq!(h.value(-2.0), 1.5);
    }

    #[test]
    fn mse_zero_at_target() {
        let (l, g) = loss_and_grad(LossKind::Mse, &[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn mae_kink_subgradient() {
        assert_eq!(LossKind::Mae.derivative(0.0), 0.0);
    }

    #[test]
    fn errors() {
        assert!(loss_and_grad(LossKind::Mse, &[], &[]).is_err());
        assert!(loss_and_grad(LossKind::Mse, &[1.0], &[]).is_err());
        assert!(loss_and_grad(LossKind::Huber(0.0), &[1.0], &[1.0]).is_err());
    }
}
