use rand::Rng;

use super::{add_noise, clip_in_place, sanitize, DpVariant, LipschitzMode, PrivacyReport, PrivacySpec, RdpLedger};
use crate::autodiff::{interpolate, penalty_at, Graph, Tensor};
use crate::data::Table;
use crate::encoder::TableEncoder;
use crate::error::{Error, Result};
use crate::gan::{EpochLosses, GLosses, GanModel, LossMode, LossTrace, TrainConfig, Trainer};

/// A differentially private training run.
#[derive(Debug, Clone)]
pub struct DpOutcome {
    pub model: GanModel,
    pub trace: LossTrace,
    pub report: PrivacyReport,
    /// Final accountant state; sampling from `model` never changes it.
    pub ledger: RdpLedger,
}

fn prepare(table: &Table, config: &TrainConfig, spec: &PrivacySpec) -> Result<(TrainConfig, PrivacySpec, u64)> {
    if config.loss_mode != LossMode::WganGp {
        return Err(Error::InvalidPrivacySpec("DP training requires the wgan_gp loss".into()));
    }
    let mut spec = spec.clone();
    spec.n_rows = Some(table.n_rows());
    let t = spec.plan_iterations()?;
    let mut cfg = config.clone();
    cfg.batch_size = spec.batch_size.max(2);
    if let LipschitzMode::WeightClip(_) = spec.lipschitz {
        cfg.tau_pen = 0.0;
    }
    Ok((cfg, spec, t))
}

fn clamp_weights(params: &mut [Tensor], mode: LipschitzMode) {
    if let LipschitzMode::WeightClip(c) = mode {
        for p in params {
            p.data.iter_mut().for_each(|v| *v = v.clamp(-c, c));
        }
    }
}

fn flatten(ts: &[Tensor]) -> Vec<f64> {
    ts.iter().flat_map(|t| t.data.iter().copied()).collect()
}

fn add_flat(ts: &mut [Tensor], flat: &[f64]) {
    let mut at = 0;
    for t in ts {
        for v in t.data.iter_mut() {
            *v += flat[at];
            at += 1;
        }
    }
}

/// Accumulates per-iteration losses into epoch records.
struct EpochAcc {
    acc: EpochLosses,
    d_count: usize,
    g_count: usize,
}

impl EpochAcc {
    fn new(epoch: usize) -> Self {
        EpochAcc {
            acc: EpochLosses {
                epoch,
                d: 0.0,
                g: 0.0,
                class: 0.0,
                info: 0.0,
                cond: 0.0,
            },
            d_count: 0,
            g_count: 0,
        }
    }

    fn finish(mut self) -> EpochLosses {
        let (d, g) = (self.d_count.max(1) as f64, self.g_count.max(1) as f64);
        self.acc.d /= d;
        self.acc.g /= g;
        self.acc.class /= g;
        self.acc.info /= g;
        self.acc.cond /= g;
        self.acc
    }
}

/// Critic update with the real-data term sanitized per example. The fake
/// term and the gradient penalty are left unperturbed.
fn dp_d_step(tr: &mut Trainer, spec: &PrivacySpec) -> Result<f64> {
    let batch = tr.sample_uniform_batch(spec.batch_size);
    let fake = tr.fake_values(&batch.cond);
    let real_j = Tensor::hcat(&[&batch.real, &batch.cond]);
    let fake_j = Tensor::hcat(&[&fake, &batch.cond]);
    let a = tr.active_critic;
    let model = &tr.model;
    let net = &tr.critics[a].net;

    let mut g = Graph::new();
    let dvars = net.bind(&mut g);
    let fv = g.constant(fake_j.clone());
    let lf = model.critic_on_joined(&mut g, &dvars, fv).out;
    let mut public = g.mean(lf);
    if spec.lipschitz == LipschitzMode::GradientPenalty && model.config.tau_pen > 0.0 {
        let x_hat = interpolate(&real_j, &fake_j, model.config.interpolation, &mut tr.rng);
        let xh = g.leaf(x_hat);
        let p = penalty_at(&mut g, |g, x| model.critic_on_joined(g, &dvars, x).out, xh, model.config.tau_pen)?;
        tr.gp_norms.extend_from_slice(&p.grad_norms);
        public = g.add(public, p.loss);
    }
    let public_value = g.value(public).item();
    let mut grads = g.backward(public, &dvars)?;

    let b = real_j.rows;
    let mut per_example = Vec::with_capacity(b);
    let mut real_score = 0.0;
    for i in 0..b {
        let mut g = Graph::new();
        let vars = net.bind(&mut g);
        let x = g.constant(Tensor::row_vector(real_j.row(i).to_vec()));
        let out = model.critic_on_joined(&mut g, &vars, x).out;
        real_score += g.value(out).item();
        let neg = g.scale(out, -1.0);
        per_example.push(flatten(&g.backward(neg, &vars)?));
    }
    let private = sanitize(&per_example, spec.clip, spec.sigma, &mut tr.rng);
    add_flat(&mut grads, &private);

    let value = tr.check("L_D", public_value - real_score / b as f64)?;
    let slot = &mut tr.critics[a];
    slot.opt.step(&mut slot.net.params, &grads);
    clamp_weights(&mut slot.net.params, spec.lipschitz);
    tr.last_real = Some(batch.real);
    Ok(value)
}

/// Clips each row of `grad` (scaled to a per-row loss) to norm `c`, adds
/// `N(0, sigma^2 c^2)` noise and rescales to the batch mean.
fn sanitize_rows<R: Rng + ?Sized>(grad: &Tensor, c: f64, sigma: f64, rng: &mut R) -> Tensor {
    let b = grad.rows as f64;
    let mut out = grad.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        row.iter_mut().for_each(|v| *v *= b);
        clip_in_place(row, c);
    }
    add_noise(&mut out.data, sigma * c, rng);
    out.data.iter_mut().for_each(|v| *v /= b);
    out
}

/// Generator update whose critic and classifier gradients are sanitized at
/// the generator output. Returns the names of the sanitized loss terms.
pub(crate) fn dp_g_step(tr: &mut Trainer, spec: &PrivacySpec) -> Result<(GLosses, Vec<&'static str>)> {
    let mut g = Graph::new();
    let t = tr.g_terms(&mut g)?;
    let losses = tr.g_losses(&g, &t)?;
    let (rows, cols) = g.shape(t.fake);
    let mut total = Tensor::zeros(rows, cols);
    let mut sanitized = Vec::new();
    for (name, term) in [("orig", Some(t.orig)), ("info", Some(t.info)), ("class", t.class)] {
        let Some(term) = term else { continue };
        let grad = g.backward(term, &[t.fake])?.remove(0);
        let s = sanitize_rows(&grad, spec.clip, spec.sigma, &mut tr.rng);
        total.data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += b);
        sanitized.push(name);
    }
    let sv = g.constant(total);
    let prod = g.mul(t.fake, sv);
    let surrogate = g.sum_all(prod);
    let objective = g.add(surrogate, t.cond);
    let grads = g.backward(objective, &t.gvars)?;
    tr.opt_g.step(&mut tr.model.generator.params, &grads);
    Ok((losses, sanitized))
}

fn warn_short_budget(t: u64, wanted: u64) {
    if t < wanted {
        log::warn!("privacy budget exhausted before the configured epochs: {t} of {wanted} updates");
    }
}

/// Trains with sanitized critic updates until the planned number of critic
/// iterations. The classifier and the information loss are disabled since
/// both would pass real rows to the generator outside the sanitized path.
pub fn train_d_dp(table: &Table, config: &TrainConfig, spec: &PrivacySpec) -> Result<DpOutcome> {
    let (cfg, spec, t) = prepare(table, config, spec)?;
    let encoder = TableEncoder::fit(table, &cfg.encoder)?;
    let mut tr = Trainer::with_encoder(table, encoder, &cfg)?;
    tr.model.classifier = None;
    tr.opt_c = None;
    tr.use_info = false;
    let costs = spec.step_costs()?;
    let mut ledger = RdpLedger::new(spec.orders.clone());
    let d_steps = cfg.d_steps() as u64;
    let per_epoch = tr.steps_per_epoch() as u64 * d_steps;
    warn_short_budget(t, per_epoch * cfg.epochs as u64);
    let mut acc = EpochAcc::new(0);
    for it in 1..=t {
        acc.acc.d += dp_d_step(&mut tr, &spec)?;
        acc.d_count += 1;
        ledger.compose(&costs);
        if it % d_steps == 0 || it == t {
            let l = tr.g_step()?;
            acc.acc.g += l.total;
            acc.acc.info += l.info;
            acc.acc.cond += l.cond;
            acc.g_count += 1;
        }
        if it % per_epoch == 0 || it == t {
            let next = tr.epoch + 1;
            tr.finish_epoch(std::mem::replace(&mut acc, EpochAcc::new(next)).finish());
        }
    }
    finish(tr, &spec, ledger)
}

/// Trains with sanitized generator updates against `n_discriminators`
/// critics, each owning a disjoint partition of the rows.
pub fn train_g_dp(table: &Table, config: &TrainConfig, spec: &PrivacySpec) -> Result<DpOutcome> {
    let (cfg, spec, t) = prepare(table, config, spec)?;
    let encoder = TableEncoder::fit(table, &cfg.encoder)?;
    let mut tr = Trainer::with_partitions(table, encoder, &cfg, spec.n_discriminators)?;
    let costs = spec.step_costs()?;
    let mut ledger = RdpLedger::new(spec.orders.clone());
    let d_steps = cfg.d_steps();
    let per_epoch = tr.steps_per_epoch() as u64;
    warn_short_budget(t, per_epoch * cfg.epochs as u64);
    let mut acc = EpochAcc::new(0);
    for it in 1..=t {
        tr.active_critic = tr.rng.random_range(0..tr.critics.len());
        for _ in 0..d_steps {
            acc.acc.d += tr.d_step()?;
            acc.d_count += 1;
            let slot = &mut tr.critics[tr.active_critic];
            clamp_weights(&mut slot.net.params, spec.lipschitz);
        }
        if let Some(real) = tr.last_real.take() {
            tr.c_step(&real)?;
        }
        let (l, _) = dp_g_step(&mut tr, &spec)?;
        ledger.compose(&costs);
        acc.acc.g += l.total;
        acc.acc.class += l.class;
        acc.acc.info += l.info;
        acc.acc.cond += l.cond;
        acc.g_count += 1;
        if it % per_epoch == 0 || it == t {
            let next = tr.epoch + 1;
            tr.finish_epoch(std::mem::replace(&mut acc, EpochAcc::new(next)).finish());
        }
    }
    finish(tr, &spec, ledger)
}

fn finish(tr: Trainer, spec: &PrivacySpec, ledger: RdpLedger) -> Result<DpOutcome> {
    let report = spec.report(ledger.steps)?;
    let (model, trace) = tr.into_model();
    Ok(DpOutcome {
        model,
        trace,
        report,
        ledger,
    })
}

/// Dispatches on `spec.variant`.
pub fn train_dp(table: &Table, config: &TrainConfig, spec: &PrivacySpec) -> Result<DpOutcome> {
    match spec.variant {
        DpVariant::DDp => train_d_dp(table, config, spec),
        DpVariant::GDp => train_g_dp(table, config, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cell, ColumnSpec, TableSchema};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize) -> Table {
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::categorical("y", ["a", "b"]).as_target(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows = (0..n)
            .map(|_| {
                vec![
                    Cell::Num(rng.random_range(-1.0..1.0)),
                    Cell::Cat(usize::from(rng.random_bool(0.3))),
                ]
            })
            .collect();
        Table::new(schema, rows).unwrap()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            loss_mode: LossMode::WganGp,
            hidden: 16,
            latent_dim: 8,
            epochs: 1,
            d_steps: Some(1),
            ..TrainConfig::default()
        }
    }

    fn spec(variant: DpVariant) -> PrivacySpec {
        let mut s = PrivacySpec::new(variant, 20.0, 10);
        s.iterations = Some(3);
        s.n_discriminators = 10;
        s
    }

    #[test]
    fn partitions_are_disjoint_and_equal() {
        let t = toy(1000);
        let cfg = TrainConfig {
            batch_size: 10,
            ..small_config()
        };
        let enc = TableEncoder::fit(&t, &cfg.encoder).unwrap();
        let tr = Trainer::with_partitions(&t, enc, &cfg, 10).unwrap();
        let key = |r: &[f64]| r.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let mut seen: Vec<Vec<u64>> = Vec::new();
        for slot in &tr.critics {
            assert_eq!(slot.data.n_rows, 100);
            seen.extend((0..100).map(|i| key(slot.data.row(i))));
        }
        let mut all: Vec<Vec<u64>> = (0..1000).map(|i| key(tr.data.row(i))).collect();
        seen.sort();
        all.sort();
        assert_eq!(seen, all);
    }

    #[test]
    fn generator_update_never_sanitizes_the_condition_loss() {
        let t = toy(200);
        let (cfg, spec, _) = prepare(&t, &small_config(), &spec(DpVariant::GDp)).unwrap();
        let enc = TableEncoder::fit(&t, &cfg.encoder).unwrap();
        let mut tr = Trainer::with_partitions(&t, enc, &cfg, spec.n_discriminators).unwrap();
        let (_, names) = dp_g_step(&mut tr, &spec).unwrap();
        assert_eq!(names, vec!["orig", "info", "class"]);
    }

    #[test]
    fn reported_epsilon_respects_target() {
        let t = toy(500);
        let mut s = spec(DpVariant::DDp);
        s.iterations = None;
        s.epsilon = Some(1.0);
        let out = train_d_dp(&t, &small_config(), &s).unwrap();
        assert!(out.report.epsilon <= 1.0);
        assert!(out.report.iterations > 0);
        assert_eq!(out.ledger.steps, out.report.iterations);
        let frozen = out.ledger.clone();
        out.model.sample(50, None, 3).unwrap();
        out.model.sample(5, Some((1, 0)), 4).unwrap();
        assert_eq!(out.ledger, frozen);
        assert!(out.model.classifier.is_none());
    }

    #[test]
    fn g_dp_runs_planned_iterations() {
        let out = train_g_dp(&toy(200), &small_config(), &spec(DpVariant::GDp)).unwrap();
        assert_eq!(out.report.iterations, 3);
        assert_eq!(out.report.gamma, 0.1);
        assert!(!out.trace.epochs.is_empty());
    }

    #[test]
    fn weight_clip_bounds_critic_parameters() {
        let mut s = spec(DpVariant::DDp);
        s.lipschitz = LipschitzMode::WeightClip(0.01);
        let out = train_d_dp(&toy(100), &small_config(), &s).unwrap();
        for p in &out.model.discriminator.params {
            assert!(p.data.iter().all(|v| v.abs() <= 0.01));
        }
    }

    #[test]
    fn rejects_vanilla_loss_and_empty_budget() {
        let t = toy(100);
        let cfg = TrainConfig {
            loss_mode: LossMode::Vanilla,
            ..small_config()
        };
        assert!(matches!(train_d_dp(&t, &cfg, &spec(DpVariant::DDp)), Err(Error::InvalidPrivacySpec(_))));
        let mut s = spec(DpVariant::DDp);
        s.iterations = None;
        s.epsilon = Some(1.0);
        s.sigma = 0.5;
        assert!(matches!(train_d_dp(&t, &small_config(), &s), Err(Error::BudgetTooSmall)));
    }
}
