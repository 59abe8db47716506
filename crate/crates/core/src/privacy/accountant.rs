use serde::{Deserialize, Serialize};

use super::DpVariant;
use crate::error::{Error, Result};

/// RDP at order `lambda` of the Gaussian mechanism with L2 sensitivity
/// `sensitivity` and noise multiplier `sigma`.
pub fn rdp_gaussian(lambda: f64, sensitivity: f64, sigma: f64) -> f64 {
    lambda * sensitivity * sensitivity / (2.0 * sigma * sigma)
}

/// RDP cost of one update: `B` composed Gaussian mechanisms of
/// sensitivity 2 per loss path (one path for `DDp`, three for `GDp`).
pub fn per_update_cost(variant: DpVariant, lambda: f64, batch_size: usize, sigma: f64) -> f64 {
    let paths = match variant {
        DpVariant::DDp => 1.0,
        DpVariant::GDp => 3.0,
    };
    paths * batch_size as f64 * rdp_gaussian(lambda, 2.0, sigma)
}

pub(crate) fn ln_binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Subsampled-without-replacement RDP bound at integer order `lambda`,
/// evaluated in log space. The mechanism's RDP at order infinity is taken
/// as unbounded, so every `min` selects its finite arm.
pub fn amplify_by_subsampling(gamma: f64, lambda: u32, eps: impl Fn(u32) -> f64) -> Result<f64> {
    if lambda < 2 || !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidPrivacySpec(format!(
            "subsampling needs lambda >= 2 and gamma in (0, 1], got {lambda}, {gamma}"
        )));
    }
    let lg = gamma.ln();
    let e2 = eps(2);
    let mut terms = vec![0.0];
    if e2 > 0.0 {
        let a = 4f64.ln() + e2 + (-(-e2).exp()).ln_1p();
        let b = 2f64.ln() + e2;
        terms.push(2.0 * lg + ln_binomial(lambda, 2) + a.min(b));
    }
    for j in 3..=lambda {
        terms.push(j as f64 * lg + ln_binomial(lambda, j) + (j - 1) as f64 * eps(j) + 2f64.ln());
    }
    let v = log_sum_exp(&terms) / (lambda - 1) as f64;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericalOverflow(lambda))
    }
}

pub fn default_orders() -> Vec<u32> {
    (2..=64).collect()
}

/// Cumulative RDP per order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpLedger {
    pub orders: Vec<u32>,
    pub epsilons: Vec<f64>,
    pub steps: u64,
}

impl RdpLedger {
    pub fn new(orders: Vec<u32>) -> Self {
        let epsilons = vec![0.0; orders.len()];
        RdpLedger {
            orders,
            epsilons,
            steps: 0,
        }
    }

    /// Adds one step whose cost at `orders[i]` is `costs[i]`.
    pub fn compose(&mut self, costs: &[f64]) {
        self.compose_n(costs, 1);
    }

    pub fn compose_n(&mut self, costs: &[f64], n: u64) {
        for (e, c) in self.epsilons.iter_mut().zip(costs) {
            *e += n as f64 * c;
        }
        self.steps += n;
    }
}

/// Converts the ledger to `(epsilon, best order)` at the given `delta`.
pub fn compose_and_convert(ledger: &RdpLedger, delta: f64) -> Result<(f64, u32)> {
    convert(&ledger.orders, &ledger.epsilons, delta)
}

fn convert(orders: &[u32], eps: &[f64], delta: f64) -> Result<(f64, u32)> {
    let ld = (1.0 / delta).ln();
    orders
        .iter()
        .zip(eps)
        .map(|(&l, &e)| (e + ld / (l - 1) as f64, l))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(Error::EmptyLedger)
}

/// Amplified cost of one update at each order.
pub fn step_costs(variant: DpVariant, gamma: f64, batch_size: usize, sigma: f64, orders: &[u32]) -> Result<Vec<f64>> {
    orders
        .iter()
        .map(|&l| amplify_by_subsampling(gamma, l, |j| per_update_cost(variant, j as f64, batch_size, sigma)))
        .collect()
}

/// Epsilon after `t` updates of per-order cost `costs`.
pub fn epsilon_after(orders: &[u32], costs: &[f64], t: u64, delta: f64) -> Result<(f64, u32)> {
    let eps: Vec<f64> = costs.iter().map(|c| c * t as f64).collect();
    convert(orders, &eps, delta)
}

const MAX_ITERATIONS: u64 = 1 << 40;

/// Largest `T` whose composed cost converts to at most `target` epsilon.
pub fn max_iterations(orders: &[u32], costs: &[f64], delta: f64, target: f64) -> Result<u64> {
    let ok = |t: u64| epsilon_after(orders, costs, t, delta).map(|(e, _)| e <= target);
    if !ok(1)? {
        return Err(Error::BudgetTooSmall);
    }
    let mut lo = 1;
    let mut hi = 2;
    while ok(hi)? {
        lo = hi;
        hi *= 2;
        if hi > MAX_ITERATIONS {
            return Ok(MAX_ITERATIONS);
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
