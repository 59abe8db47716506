//! Reverse-mode automatic differentiation over dense matrices, plus the
//! network building blocks the generative models need.

mod graph;
mod nn;
mod tensor;

pub use graph::{Graph, Var};
pub use nn::{Activation, Adam, Mlp, MlpOutput, MlpSpec, LAYER_NORM_EPS};
pub use tensor::Tensor;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard Gumbel noise `-ln(-ln U)`.
pub fn gumbel_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            -(-u.ln()).ln()
        })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

/// Row-wise `softmax((logits + noise) / temperature)`. Without `noise`
/// this is a tempered softmax.
pub fn gumbel_softmax(g: &mut Graph, logits: Var, temperature: f64, noise: Option<Tensor>) -> Var {
    assert!(temperature > 0.0, "temperature must be positive");
    let x = match noise {
        Some(n) => {
            let nv = g.constant(n);
            g.add(logits, nv)
        }
        None => logits,
    };
    let scaled = g.scale(x, 1.0 / temperature);
    g.softmax(scaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Spherical,
    Linear,
}

/// Per-row interpolation between `a` and `b` at uniform random positions.
pub fn interpolate<R: Rng + ?Sized>(a: &Tensor, b: &Tensor, mode: Interpolation, rng: &mut R) -> Tensor {
    let mut out = a.clone();
    for i in 0..a.rows {
        let t: f64 = rng.random();
        let (ra, rb) = (a.row(i), b.row(i));
        let (wa, wb) = match mode {
            Interpolation::Linear => (1.0 - t, t),
            Interpolation::Spherical => slerp_weights(ra, rb, t),
        };
        for (o, (&x, &y)) in out.row_mut(i).iter_mut().zip(ra.iter().zip(rb)) {
            *o = wa * x + wb * y;
        }
    }
    out
}

fn slerp_weights(a: &[f64], b: &[f64], t: f64) -> (f64, f64) {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return (1.0 - t, t);
    }
    let cos = (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
    let omega = cos.acos();
    let s = omega.sin();
    if s < 1e-6 {
        return (1.0 - t, t);
    }
    (((1.0 - t) * omega).sin() / s, (t * omega).sin() / s)
}

pub struct PenaltyOutput {
    /// `tau * mean((||grad D(x_hat)|| - 1)^2)`, differentiable in the
    /// critic's parameters.
    pub loss: Var,
    pub grad_norms: Vec<f64>,
}

/// Gradient penalty of `critic` at interpolates of `real` and `fake`.
/// The critic must treat rows independently and be built from
/// twice-differentiable operations.
pub fn gradient_penalty<R, F>(
    g: &mut Graph,
    critic: F,
    real: &Tensor,
    fake: &Tensor,
    tau: f64,
    mode: Interpolation,
    rng: &mut R,
) -> Result<PenaltyOutput>
where
    R: Rng + ?Sized,
    F: FnOnce(&mut Graph, Var) -> Var,
{
    if real.shape() != fake.shape() {
        return Err(Error::ShapeMismatch {
            op: "gradient_penalty",
            lhs: real.shape(),
            rhs: fake.shape(),
        });
    }
    let x_hat = g.leaf(interpolate(real, fake, mode, rng));
    penalty_at(g, critic, x_hat, tau)
}

/// Gradient penalty at the given input points.
pub fn penalty_at<F>(g: &mut Graph, critic: F, x_hat: Var, tau: f64) -> Result<PenaltyOutput>
where
    F: FnOnce(&mut Graph, Var) -> Var,
{
    let out = critic(g, x_hat);
    let total = g.sum_all(out);
    let dx = g.grad(total, &[x_hat])?[0];
    let norms = g.l2_norm_rows(dx, 1e-12);
    let grad_norms = g.value(norms).data.clone();
    let d = g.add_scalar(norms, -1.0);
    let d2 = g.mul(d, d);
    let m = g.mean(d2);
    let loss = g.scale(m, tau);
    Ok(PenaltyOutput { loss, grad_norms })
}
