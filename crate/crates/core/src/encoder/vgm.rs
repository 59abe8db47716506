//! One-dimensional Gaussian mixtures with automatic mode-count estimation.
//!
//! Candidate component counts `1..=max_modes` are each fitted by EM from a
//! k-means++ seeding; the count with the lowest BIC wins. Components whose
//! weight falls under `weight_threshold` are then deactivated and the
//! remaining weights renormalized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VgmModel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub active: Vec<bool>,
    pub max_modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VgmConfig {
    pub max_modes: usize,
    pub weight_threshold: f64,
    pub max_iter: usize,
    /// Convergence threshold on the mean per-sample log-likelihood.
    pub tol: f64,
    pub seed: u64,
}

impl Default for VgmConfig {
    fn default() -> Self {
        VgmConfig {
            max_modes: 10,
            weight_threshold: 0.005,
            max_iter: 100,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Diagnostics from a fit: per-candidate EM log-likelihood traces and BIC.
#[derive(Debug, Clone, Default)]
pub struct VgmFitReport {
    pub candidates: Vec<CandidateFit>,
    pub chosen_components: usize,
}

#[derive(Debug, Clone)]
pub struct CandidateFit {
    pub components: usize,
    pub log_likelihood_trace: Vec<f64>,
    pub bic: f64,
}

impl VgmModel {
    /// A single active mode; used for degenerate columns.
    pub fn single(mean: f64, std: f64) -> Self {
        VgmModel {
            weights: vec![1.0],
            means: vec![mean],
            stds: vec![std],
            active: vec![true],
            max_modes: 1,
        }
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&k| self.active[k]).collect()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Position (among active modes) of the mode maximizing
    /// `w_k * N(x; mu_k, sigma_k)`. Ties go to the lowest index.
    pub fn select_mode(&self, x: f64) -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut best_pos = 0;
        for (pos, k) in self.active_indices().into_iter().enumerate() {
            let z = (x - self.means[k]) / self.stds[k];
            let score = self.weights[k].ln() - self.stds[k].ln() - 0.5 * z * z;
            if score > best {
                best = score;
                best_pos = pos;
            }
        }
        best_pos
    }

    /// Mean and std of the `pos`-th active mode.
    pub fn active_mode(&self, pos: usize) -> (f64, f64) {
        let k = self.active_indices()[pos];
        (self.means[k], self.stds[k])
    }

    pub fn log_likelihood(&self, values: &[f64]) -> f64 {
        let idx = self.active_indices();
        values
            .iter()
            .map(|&x| {
                log_sum_exp(idx.iter().map(|&k| {
                    log_normal(x, self.means[k], self.stds[k]) + self.weights[k].ln()
                }))
            })
            .sum()
    }
}

fn log_normal(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - LN_SQRT_2PI
}

fn log_sum_exp(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standard-deviation floor for a column.
pub fn sigma_floor(values: &[f64]) -> f64 {
    let (_, std) = mean_std(values);
    1e-4 * if std > 0.0 { std } else { 1.0 }
}

pub fn fit_vgm(values: &[f64], max_modes: usize, weight_threshold: f64) -> Result<VgmModel> {
    let cfg = VgmConfig {
        max_modes,
        weight_threshold,
        ..VgmConfig::default()
    };
    fit_vgm_with(values, &cfg).map(|(m, _)| m)
}

pub fn fit_vgm_with(values: &[f64], cfg: &VgmConfig) -> Result<(VgmModel, VgmFitReport)> {
    let values: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.max_modes == 0 {
        return Err(Error::InvalidConfig("max_modes must be at least 1".into()));
    }
    let floor = sigma_floor(&values);
    let mut distinct = values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        let mut m = VgmModel::single(values[0], floor);
        m.max_modes = cfg.max_modes;
        return Ok((m, VgmFitReport::default()));
    }

    let n = values.len() as f64;
    let k_max = cfg.max_modes.min(distinct.len());
    let mut report = VgmFitReport::default();
    let mut best: Option<(f64, Mixture)> = None;
    let mut worse_in_a_row = 0;
    for k in 1..=k_max {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        let init = kmeans_pp_init(&values, k, floor, &mut rng);
        let (mix, trace) = run_em(&values, init, floor, cfg.max_iter, cfg.tol);
        let ll = *trace.last().expect("EM records at least one step");
        let bic = -2.0 * ll + (3 * k - 1) as f64 * n.ln();
        report.candidates.push(CandidateFit {
            components: k,
            log_likelihood_trace: trace,
            bic,
        });
        match &best {
            Some((b, _)) if bic >= *b => {
                worse_in_a_row += 1;
                if worse_in_a_row >= 2 {
                    break;
                }
            }
            _ => {
                worse_in_a_row = 0;
                best = Some((bic, mix));
            }
        }
    }
    let (_, mut mix) = best.expect("at least one candidate");
    report.chosen_components = mix.weights.len();

    // order components by mean for a stable layout
    let mut order: Vec<usize> = (0..mix.weights.len()).collect();
    order.sort_by(|&a, &b| mix.means[a].total_cmp(&mix.means[b]));
    mix = Mixture {
        weights: order.iter().map(|&i| mix.weights[i]).collect(),
        means: order.iter().map(|&i| mix.means[i]).collect(),
        stds: order.iter().map(|&i| mix.stds[i]).collect(),
    };

    let mut active: Vec<bool> = mix.weights.iter().map(|&w| w >= cfg.weight_threshold).collect();
    if !active.iter().any(|&a| a) {
        let top = (0..mix.weights.len())
            .max_by(|&a, &b| mix.weights[a].total_cmp(&mix.weights[b]))
            .unwrap();
        active[top] = true;
    }
    let total: f64 = (0..active.len()).filter(|&k| active[k]).map(|k| mix.weights[k]).sum();
    let weights = mix
        .weights
        .iter()
        .zip(&active)
        .map(|(&w, &a)| if a { w / total } else { 0.0 })
        .collect();
    Ok((
        VgmModel {
            weights,
            means: mix.means,
            stds: mix.stds,
            active,
            max_modes: cfg.max_modes,
        },
        report,
    ))
}

#[derive(Debug, Clone)]
struct Mixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

fn kmeans_pp_init(values: &[f64], k: usize, floor: f64, rng: &mut ChaCha8Rng) -> Mixture {
    // seeding runs on a bounded subsample
    let pool: Vec<f64> = if values.len() > 2000 {
        rand::seq::index::sample(rng, values.len(), 2000)
            .into_iter()
            .map(|i| values[i])
            .collect()
    } else {
        values.to_vec()
    };
    let mut centers = vec![pool[rng.random_range(0..pool.len())]];
    let mut d2: Vec<f64> = pool.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            pool[rng.random_range(0..pool.len())]
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut pick = pool.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pool[pick]
        };
        centers.push(next);
        for (d, x) in d2.iter_mut().zip(&pool) {
            *d = d.min((x - next).powi(2));
        }
    }
    // a few Lloyd iterations over the full data
    let mut assign = vec![0usize; values.len()];
    for _ in 0..10 {
        for (a, &x) in assign.iter_mut().zip(values) {
            *a = nearest(&centers, x);
        }
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for (&a, &x) in assign.iter().zip(values) {
            sum[a] += x;
            cnt[a] += 1;
        }
        for j in 0..k {
            if cnt[j] > 0 {
                centers[j] = sum[j] / cnt[j] as f64;
            }
        }
    }
    let (_, global_std) = mean_std(values);
    let mut weights = vec![0.0; k];
    let mut ss = vec![0.0; k];
    for (&a, &x) in assign.iter().zip(values) {
        weights[a] += 1.0;
        ss[a] += (x - centers[a]).powi(2);
    }
    let n = values.len() as f64;
    let stds = (0..k)
        .map(|j| {
            if weights[j] >= 2.0 {
                (ss[j] / weights[j]).sqrt().max(floor)
            } else {
                global_std.max(floor)
            }
        })
        .collect();
    let weights = weights.iter().map(|w| (w / n).max(1e-3)).collect::<Vec<_>>();
    let wsum: f64 = weights.iter().sum();
    Mixture {
        weights: weights.iter().map(|w| w / wsum).collect(),
        means: centers,
        stds,
    }
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (j, c) in centers.iter().enumerate() {
        if (x - c).abs() < (x - centers[best]).abs() {
            best = j;
        }
    }
    best
}

/// EM with a variance floor. The returned trace holds the total
/// log-likelihood evaluated before each M-step and after the final one.
fn run_em(
    values: &[f64],
    mut mix: Mixture,
    floor: f64,
    max_iter: usize,
    tol: f64,
) -> (Mixture, Vec<f64>) {
    let k = mix.weights.len();
    let n = values.len();
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut logp = vec![0.0; k];
    for _ in 0..max_iter {
        let ll = e_step(values, &mix, &mut resp, &mut logp);
        if let Some(&prev) = trace.last() {
            if (ll - prev) / (n as f64) < tol {
                trace.push(ll);
                break;
            }
        }
        trace.push(ll);
        // M-step
        for j in 0..k {
            let mut nk = 0.0;
            let mut sx = 0.0;
            for i in 0..n {
                let r = resp[i * k + j];
                nk += r;
                sx += r * values[i];
            }
            if nk < 1e-10 {
                mix.weights[j] = 0.0;
                continue;
            }
            let mu = sx / nk;
            let mut sv = 0.0;
            for i in 0..n {
                sv += resp[i * k + j] * (values[i] - mu).powi(2);
            }
            mix.means[j] = mu;
            mix.stds[j] = (sv / nk).sqrt().max(floor);
            mix.weights[j] = nk / n as f64;
        }
    }
    let ll = e_step(values, &mix, &mut resp, &mut logp);
    if trace.last() != Some(&ll) {
        trace.push(ll);
    }
    (mix, trace)
}

fn e_step(values: &[f64], mix: &Mixture, resp: &mut [f64], logp: &mut [f64]) -> f64 {
    let k = mix.weights.len();
    let log_w: Vec<f64> = mix.weights.iter().map(|w| w.ln()).collect();
    let mut ll = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let mut m = f64::NEG_INFINITY;
        for j in 0..k {
            logp[j] = log_w[j] + log_normal(x, mix.means[j], mix.stds[j]);
            m = m.max(logp[j]);
        }
        let s: f64 = logp.iter().map(|l| (l - m).exp()).sum();
        let lse = m + s.ln();
        ll += lse;
        for j in 0..k {
            resp[i * k + j] = (logp[j] - lse).exp();
        }
    }
    ll
}

/// Mode-specific normalization: `alpha = (x - mu)/(4 sigma)` clamped to
/// `[-1, 1]`, with a one-hot over active modes.
pub fn msn_encode(x: f64, m: &VgmModel) -> (f64, Vec<f64>) {
    let pos = m.select_mode(x);
    let (mu, sigma) = m.active_mode(pos);
    let alpha = ((x - mu) / (4.0 * sigma)).clamp(-1.0, 1.0);
    let mut beta = vec![0.0; m.n_active()];
    beta[pos] = 1.0;
    (alpha, beta)
}

/// Inverse of [`msn_encode`] for an exact one-hot `beta`.
pub fn msn_decode(alpha: f64, beta: &[f64], m: &VgmModel) -> Result<f64> {
    let pos = one_hot_index(beta).ok_or(Error::InvalidOneHot)?;
    if beta.len() != m.n_active() {
        return Err(Error::InvalidOneHot);
    }
    let (mu, sigma) = m.active_mode(pos);
    Ok(alpha * 4.0 * sigma + mu)
}

pub(crate) fn one_hot_index(v: &[f64]) -> Option<usize> {
    let mut hit = None;
    for (i, &b) in v.iter().enumerate() {
        if b == 1.0 {
            if hit.is_some() {
                return None;
            }
            hit = Some(i);
        } else if b != 0.0 {
            return None;
        }
    }
    hit
}
