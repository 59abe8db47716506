//! DP-SGD sanitization, RDP accounting and differentially private
//! training of the critic or the generator.

mod accountant;
mod train;

pub use accountant::{
    amplify_by_subsampling, compose_and_convert, default_orders, epsilon_after, max_iterations, per_update_cost,
    rdp_gaussian, step_costs, RdpLedger,
};
pub use train::{train_d_dp, train_dp, train_g_dp, DpOutcome};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DpVariant {
    /// Sanitized critic updates.
    DDp,
    /// Sanitized generator updates against partitioned critics.
    GDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum LipschitzMode {
    GradientPenalty,
    /// Clamp every critic parameter to `[-c, c]` after each update.
    WeightClip(f64),
}

fn default_clip() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    1e-5
}

fn default_discriminators() -> usize {
    1
}

fn default_lipschitz() -> LipschitzMode {
    LipschitzMode::GradientPenalty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub variant: DpVariant,
    /// Target epsilon; the planner picks the iteration count.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Fixed iteration count; epsilon is reported instead of planned.
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub sigma: f64,
    #[serde(default = "default_clip")]
    pub clip: f64,
    pub batch_size: usize,
    /// Training rows; filled from the table when training.
    #[serde(default)]
    pub n_rows: Option<usize>,
    #[serde(default = "default_discriminators")]
    pub n_discriminators: usize,
    #[serde(default = "default_lipschitz")]
    pub lipschitz: LipschitzMode,
    #[serde(default = "default_orders")]
    pub orders: Vec<u32>,
}

impl PrivacySpec {
    pub fn new(variant: DpVariant, sigma: f64, batch_size: usize) -> Self {
        PrivacySpec {
            variant,
            epsilon: None,
            iterations: None,
            delta: default_delta(),
            sigma,
            clip: default_clip(),
            batch_size,
            n_rows: None,
            n_discriminators: if variant == DpVariant::GDp { 2 } else { 1 },
            lipschitz: default_lipschitz(),
            orders: default_orders(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPrivacySpec(m.into()));
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return bad("epsilon must be positive");
            }
        }
        if self.epsilon.is_none() && self.iterations.is_none() {
            return bad("either epsilon or iterations is required");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.sigma > 0.0) || !(self.clip > 0.0) {
            return bad("sigma and clip must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.orders.is_empty() || self.orders.iter().any(|&l| l < 2) {
            return bad("orders must be integers >= 2");
        }
        if let LipschitzMode::WeightClip(c) = self.lipschitz {
            if !(c > 0.0) {
                return bad("weight clip bound must be positive");
            }
        }
        let n = self.n_rows()?;
        match self.variant {
            DpVariant::DDp if self.batch_size > n => bad("batch size exceeds the number of rows"),
            DpVariant::GDp if self.n_discriminators < 2 => bad("g_dp needs at least two discriminators"),
            DpVariant::GDp if self.n_discriminators > n => bad("more discriminators than rows"),
            _ => Ok(()),
        }
    }

    pub fn n_rows(&self) -> Result<usize> {
        self.n_rows
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidPrivacySpec("number of rows is unknown".into()))
    }

    /// Subsampling rate of one update.
    pub fn gamma(&self) -> Result<f64> {
        Ok(match self.variant {
            DpVariant::DDp => self.batch_size as f64 / self.n_rows()? as f64,
            DpVariant::GDp => 1.0 / self.n_discriminators as f64,
        })
    }

    /// Amplified per-update RDP cost at each order.
    pub fn step_costs(&self) -> Result<Vec<f64>> {
        step_costs(self.variant, self.gamma()?, self.batch_size, self.sigma, &self.orders)
    }

    /// Iterations allowed by the budget, or the fixed count.
    pub fn plan_iterations(&self) -> Result<u64> {
        self.validate()?;
        match (self.iterations, self.epsilon) {
            (Some(t), _) => Ok(t),
            (None, Some(eps)) => max_iterations(&self.orders, &self.step_costs()?, self.delta, eps),
            (None, None) => Err(Error::InvalidPrivacySpec("either epsilon or iterations is required".into())),
        }
    }

    /// Report for `t` updates.
    pub fn report(&self, t: u64) -> Result<PrivacyReport> {
        let costs = self.step_costs()?;
        let (epsilon, order) = epsilon_after(&self.orders, &costs, t, self.delta)?;
        Ok(PrivacyReport {
            variant: self.variant,
            sigma: self.sigma,
            clip: self.clip,
            batch_size: self.batch_size,
            gamma: self.gamma()?,
            iterations: t,
            order,
            epsilon,
            delta: self.delta,
        })
    }
}

/// Planned largest iteration count for `spec`.
pub fn plan_iterations(spec: &PrivacySpec) -> Result<u64> {
    spec.plan_iterations()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub variant: DpVariant,
    pub sigma: f64,
    pub clip: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub iterations: u64,
    /// Order attaining the reported epsilon.
    pub order: u32,
    pub epsilon: f64,
    pub delta: f64,
}

/// Scales `g` to L2 norm at most `c`; returns the original norm.
pub fn clip_in_place(g: &mut [f64], c: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > c {
        let s = c / norm;
        g.iter_mut().for_each(|v| *v *= s);
    }
    norm
}

/// Clips each per-example gradient to norm `c`, sums them, adds
/// `N(0, sigma^2 c^2)` noise per coordinate and divides by the batch size.
pub fn sanitize<R: Rng + ?Sized>(gradients: &[Vec<f64>], c: f64, sigma: f64, rng: &mut R) -> Vec<f64> {
    let Some(first) = gradients.first() else {
        return Vec::new();
    };
    let mut sum = vec![0.0; first.len()];
    for g in gradients {
        let mut g = g.clone();
        clip_in_place(&mut g, c);
        sum.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
    }
    add_noise(&mut sum, sigma * c, rng);
    let b = gradients.len() as f64;
    sum.iter_mut().for_each(|s| *s /= b);
    sum
}

pub(crate) fn add_noise<R: Rng + ?Sized>(v: &mut [f64], std: f64, rng: &mut R) {
    if std > 0.0 {
        let normal = Normal::new(0.0, std).expect("positive std");
        v.iter_mut().for_each(|x| *x += normal.sample(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clipping_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let big = vec![6.0, 8.0];
        let out = sanitize(&[big], 1.0, 0.0, &mut rng);
        assert!((out.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        let small = vec![0.3, -0.4];
        assert_eq!(sanitize(&[small.clone()], 1.0, 0.0, &mut rng), small);
    }

    #[test]
    fn noise_variance_of_batch_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (b, c, sigma) = (4usize, 0.5, 2.0);
        let grads = vec![vec![0.0; 3]; b];
        let draws: Vec<f64> = (0..10_000).map(|_| sanitize(&grads, c, sigma, &mut rng)[1]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let want = sigma * sigma * c * c / (b * b) as f64;
        assert!(((var - want) / want).abs() < 0.05, "{var} vs {want}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clipped_norm_never_exceeds_bound(
                g in proptest::collection::vec(-100.0f64..100.0, 1..20),
                c in 0.01f64..10.0,
            ) {
                let mut h = g.clone();
                clip_in_place(&mut h, c);
                let n = h.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(n <= c * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = PrivacySpec::new(DpVariant::GDp, 1.0, 10);
        s.epsilon = Some(1.0);
        s.n_rows = Some(100);
        s.n_discriminators = 1;
        assert!(matches!(s.validate(), Err(Error::InvalidPrivacySpec(_))));
        s.n_discriminators = 10;
        assert!(s.validate().is_ok());
        assert_eq!(s.gamma().unwrap(), 0.1);
        s.delta = 1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let mut s = PrivacySpec::new(DpVariant::DDp, 1.06, 64);
        s.epsilon = Some(1.0);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<PrivacySpec>(&j).unwrap(), s);
        let minimal: PrivacySpec = serde_json::from_str(r#"{"variant":"d_dp","sigma":1.0,"batch_size":8,"iterations":5}"#).unwrap();
        assert_eq!(minimal.orders.len(), 63);
        assert_eq!(minimal.clip, 1.0);
    }
}
