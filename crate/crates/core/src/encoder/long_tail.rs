use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log compression for heavy-tailed columns with lower bound `l`:
/// `log(x)` when `l > 0`, otherwise `log(x - l + eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongTailTransform {
    pub lower_bound: f64,
    pub epsilon: f64,
}

impl LongTailTransform {
    /// Lower bound from the data minimum; `epsilon` defaults to 1% of the
    /// observed range (or 0.01 for a constant column).
    pub fn fit(values: &[f64], epsilon: Option<f64>) -> Result<Self> {
        let (lo, hi) = values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !lo.is_finite() {
            return Err(Error::EmptyInput);
        }
        let range = hi - lo;
        let epsilon = epsilon.unwrap_or(if range > 0.0 { 1e-2 * range } else { 1e-2 });
        if epsilon <= 0.0 {
            return Err(Error::InvalidConfig("long-tail epsilon must be positive".into()));
        }
        Ok(LongTailTransform {
            lower_bound: lo,
            epsilon,
        })
    }

    pub fn forward(&self, x: f64) -> Result<f64> {
        let arg = if self.lower_bound > 0.0 {
            x
        } else {
            x - self.lower_bound + self.epsilon
        };
        if arg > 0.0 {
            Ok(arg.ln())
        } else {
            Err(Error::DomainError(arg))
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if self.lower_bound > 0.0 {
            y.exp()
        } else {
            y.exp() + self.lower_bound - self.epsilon
        }
    }
}

pub fn long_tail_forward(x: f64, t: &LongTailTransform) -> Result<f64> {
    t.forward(x)
}

pub fn long_tail_inverse(y: f64, t: &LongTailTransform) -> f64 {
    t.inverse(y)
}
