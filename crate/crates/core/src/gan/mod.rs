//! Conditional tabular GAN: generator, critic, auxiliary classifier,
//! composite losses, training and sampling.

mod train;

pub use train::{train, train_with_encoder, Trainer};
pub(crate) use train::GLosses;

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    gumbel_noise, gumbel_softmax, Activation, Graph, Interpolation, Mlp, MlpOutput, MlpSpec, Tensor, Var,
};
use crate::conditioning::{build_cond_vector, ClassWeighting, ConditionSampler, FreqStats};
use crate::data::Table;
use crate::encoder::{EncoderConfig, Span, TableEncoder};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Cross-entropy GAN objective with a non-saturating generator loss.
    Vanilla,
    /// Wasserstein objective with gradient penalty.
    WganGp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub betas: (f64, f64),
    pub loss_mode: LossMode,
    /// Critic updates per generator update; `None` picks 5 for
    /// `wgan_gp` and 1 for `vanilla`.
    pub d_steps: Option<usize>,
    pub tau_pen: f64,
    pub interpolation: Interpolation,
    pub gumbel_temperature: f64,
    /// Train the auxiliary classifier and add its loss to the generator.
    pub classifier: bool,
    pub seed: u64,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            batch_size: 500,
            latent_dim: 100,
            hidden: 256,
            lr: 2e-4,
            betas: (0.5, 0.9),
            loss_mode: LossMode::Vanilla,
            d_steps: None,
            tau_pen: 10.0,
            interpolation: Interpolation::Spherical,
            gumbel_temperature: 0.2,
            classifier: true,
            seed: 0,
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn d_steps(&self) -> usize {
        self.d_steps.unwrap_or(match self.loss_mode {
            LossMode::WganGp => 5,
            LossMode::Vanilla => 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be at least 2".into()));
        }
        if self.d_steps() == 0 {
            return Err(Error::InvalidConfig("d_steps must be at least 1".into()));
        }
        if self.latent_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig("network sizes must be positive".into()));
        }
        if !(self.lr > 0.0 && self.gumbel_temperature > 0.0 && self.tau_pen >= 0.0) {
            return Err(Error::InvalidConfig(
                "lr and temperature must be positive, tau_pen non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Auxiliary classifier predicting the target from the encoded row with
/// the target segment removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub net: Mlp,
    pub target_offset: usize,
    pub target_len: usize,
}

impl Classifier {
    pub fn new<R: Rng + ?Sized>(width: usize, target: (usize, usize), hidden: usize, rng: &mut R) -> Self {
        let spec = MlpSpec {
            sizes: vec![width - target.1, hidden, hidden, hidden, hidden, target.1],
            activation: Activation::LeakyRelu(0.2),
            layer_norm: false,
            dropout: 0.5,
        };
        Classifier {
            net: Mlp::new(spec, rng),
            target_offset: target.0,
            target_len: target.1,
        }
    }

    /// Encoded rows without the target segment.
    pub fn features(&self, g: &mut Graph, x: Var) -> Var {
        let width = g.shape(x).1;
        let end = self.target_offset + self.target_len;
        let mut parts = Vec::new();
        if self.target_offset > 0 {
            parts.push(g.slice_cols(x, 0, self.target_offset));
        }
        if end < width {
            parts.push(g.slice_cols(x, end, width - end));
        }
        g.concat_cols(&parts)
    }

    /// Hard labels read from the target segment.
    pub fn labels(&self, x: &Tensor) -> Vec<usize> {
        (0..x.rows)
            .map(|i| {
                let seg = &x.row(i)[self.target_offset..self.target_offset + self.target_len];
                crate::encoder::argmax(seg)
            })
            .collect()
    }

    pub fn logits<R: Rng + ?Sized>(&self, g: &mut Graph, vars: &[Var], x: Var, rng: Option<&mut R>) -> Var {
        let f = self.features(g, x);
        self.net.forward(g, vars, f, rng).out
    }
}

/// Trained generator with everything needed to sample and decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub encoder: TableEncoder,
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub classifier: Option<Classifier>,
    pub cond_stats: FreqStats,
    pub config: TrainConfig,
}

/// Generator outputs for one batch.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorOutput {
    /// Pre-activation outputs, `B x T`.
    pub raw: Var,
    /// Tanh on alpha slots, tempered (Gumbel) softmax on one-hot segments.
    pub activated: Var,
}

impl GanModel {
    pub fn new<R: Rng + ?Sized>(encoder: TableEncoder, cond_stats: FreqStats, config: TrainConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = &encoder.layout;
        let h = config.hidden;
        let generator = Mlp::new(
            MlpSpec {
                sizes: vec![config.latent_dim + layout.cond_width, h, h, layout.width],
                activation: Activation::Relu,
                layer_norm: true,
                dropout: 0.0,
            },
            rng,
        );
        let discriminator = Mlp::new(
            MlpSpec {
                sizes: vec![layout.side_d * layout.side_d, h, h, 1],
                activation: Activation::LeakyRelu(0.2),
                layer_norm: config.loss_mode == LossMode::WganGp,
                dropout: 0.0,
            },
            rng,
        );
        let classifier = if config.classifier {
            let target = encoder.target_segment().ok_or_else(|| {
                Error::InvalidConfig("the classifier needs a categorical target column".into())
            })?;
            Some(Classifier::new(layout.width, target, h, rng))
        } else {
            None
        };
        Ok(GanModel {
            encoder,
            generator,
            discriminator,
            classifier,
            cond_stats,
            config,
        })
    }

    pub fn width(&self) -> usize {
        self.encoder.layout.width
    }

    pub fn cond_width(&self) -> usize {
        self.encoder.layout.cond_width
    }

    /// Runs the generator on `z (+) cond`. Gumbel noise is drawn from `rng`
    /// when given.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        vars: &[Var],
        z: Var,
        cond: Var,
        rng: Option<&mut R>,
    ) -> GeneratorOutput {
        let input = g.concat_cols(&[z, cond]);
        let raw = self.generator.forward::<R>(g, vars, input, None).out;
        let activated = self.activate(g, raw, rng);
        GeneratorOutput { raw, activated }
    }

    fn activate<R: Rng + ?Sized>(&self, g: &mut Graph, raw: Var, mut rng: Option<&mut R>) -> Var {
        let n = g.shape(raw).0;
        let tau = self.config.gumbel_temperature;
        let mut parts = Vec::new();
        for span in &self.encoder.layout.spans {
            match *span {
                Span::Numeric {
                    alpha_offset,
                    beta_offset,
                    beta_len,
                    ..
                } => {
                    let a = g.slice_cols(raw, alpha_offset, 1);
                    parts.push(g.tanh(a));
                    let b = g.slice_cols(raw, beta_offset, beta_len);
                    let noise = rng.as_deref_mut().map(|r| gumbel_noise(n, beta_len, r));
                    parts.push(gumbel_softmax(g, b, tau, noise));
                }
                Span::Categorical {
                    gamma_offset,
                    gamma_len,
                    ..
                } => {
                    let c = g.slice_cols(raw, gamma_offset, gamma_len);
                    let noise = rng.as_deref_mut().map(|r| gumbel_noise(n, gamma_len, r));
                    parts.push(gumbel_softmax(g, c, tau, noise));
                }
            }
        }
        g.concat_cols(&parts)
    }

    /// Critic on the square-wrapped `x (+) cond`.
    pub fn critic(&self, g: &mut Graph, vars: &[Var], x: Var, cond: Var) -> MlpOutput {
        let input = g.concat_cols(&[x, cond]);
        self.critic_on_joined(g, vars, input)
    }

    /// Critic on an already joined `x (+) cond` input.
    pub fn critic_on_joined(&self, g: &mut Graph, vars: &[Var], input: Var) -> MlpOutput {
        let side = self.encoder.layout.side_d;
        let padded = g.pad_cols(input, 0, side * side);
        self.discriminator.forward::<ChaCha8Rng>(g, vars, padded, None)
    }

    /// Generates `n` activated rows (soft one-hots) under `condition`, or
    /// under conditions drawn with the data's class frequencies.
    pub fn generate_encoded(&self, n: usize, condition: Option<(usize, usize)>, seed: u64) -> Result<Tensor> {
        let layout = &self.encoder.layout;
        let fixed = match condition {
            Some((column, class)) => Some(
                build_cond_vector(layout, column, class)
                    .map_err(|_| Error::InvalidCondition(format!("column {column}, class {class}")))?,
            ),
            None => None,
        };
        let sampler = ConditionSampler::from_stats(self.cond_stats.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Tensor::zeros(0, layout.width);
        let batch = self.config.batch_size.max(1);
        let mut done = 0;
        while done < n {
            let b = batch.min(n - done);
            let mut cond = Tensor::zeros(b, layout.cond_width);
            for i in 0..b {
                let c = match &fixed {
                    Some(c) => c.clone(),
                    None => sampler.sample(ClassWeighting::Frequency, &mut rng),
                };
                cond.row_mut(i).copy_from_slice(&c.bits);
            }
            let mut g = Graph::new();
            let vars = self.generator.params.iter().map(|p| g.constant(p.clone())).collect::<Vec<_>>();
            let z = g.constant(Tensor::randn(b, self.config.latent_dim, 1.0, &mut rng));
            let cv = g.constant(cond);
            let o = self.generate(&mut g, &vars, z, cv, Some(&mut rng));
            out.data.extend_from_slice(&g.value(o.activated).data);
            out.rows += b;
            done += b;
        }
        Ok(out)
    }

    /// Draws `n` synthetic rows.
    pub fn sample(&self, n: usize, condition: Option<(usize, usize)>, seed: u64) -> Result<Table> {
        let enc = self.generate_encoded(n, condition, seed)?;
        if n == 0 {
            return Ok(Table::empty(self.encoder.schema.clone()));
        }
        self.encoder.decode_rows(&enc.data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ckpt = CheckpointRef {
            version: CHECKPOINT_VERSION,
            model: self,
        };
        let text = serde_json::to_string(&ckpt)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let header: CheckpointHeader = serde_json::from_str(&text)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion(header.version));
        }
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        Ok(ckpt.model)
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: u32,
    model: &'a GanModel,
}

#[derive(Deserialize)]
struct CheckpointHeader {
    version: u32,
}

#[derive(Deserialize)]
struct Checkpoint {
    model: GanModel,
}

/// `||mean(real) - mean(fake)||_2 + ||sd(real) - sd(fake)||_2` over batch
/// rows, with population standard deviations.
pub fn info_loss_graph(g: &mut Graph, real: Var, fake: Var) -> Result<Var> {
    let (wr, wf) = (g.shape(real).1, g.shape(fake).1);
    if wr != wf {
        return Err(Error::WidthMismatch(wr, wf));
    }
    let mr = g.mean_rows(real);
    let mf = g.mean_rows(fake);
    let dm = g.sub(mr, mf);
    let l_mean = g.l2_norm(dm, 1e-12);
    let sr = std_rows(g, real);
    let sf = std_rows(g, fake);
    let ds = g.sub(sr, sf);
    let l_sd = g.l2_norm(ds, 1e-12);
    Ok(g.add(l_mean, l_sd))
}

fn std_rows(g: &mut Graph, x: Var) -> Var {
    let v = g.variance_rows(x);
    let v = g.add_scalar(v, 1e-12);
    g.sqrt(v)
}

pub fn info_loss(real: &Tensor, fake: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let r = g.constant(real.clone());
    let f = g.constant(fake.clone());
    let l = info_loss_graph(&mut g, r, f)?;
    Ok(g.value(l).item())
}

/// Cross-entropy of classifier `logits` against `labels`.
pub fn class_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut g = Graph::new();
    let l = g.constant(logits.clone());
    let ce = g.cross_entropy(l, labels)?;
    Ok(g.value(ce).item())
}

/// Per-row condition loss: cross-entropy between each row's selected
/// class and the generator's raw logits on the selected segment, averaged
/// over rows.
pub fn cond_loss_graph(g: &mut Graph, model: &GanModel, raw: Var, conds: &[crate::conditioning::CondVector]) -> Var {
    let n = conds.len();
    let segments = model.encoder.layout.segments();
    let mut total: Option<Var> = None;
    for (s, seg) in segments.iter().enumerate() {
        let mut mask = Tensor::zeros(n, seg.len);
        let mut any = false;
        for (i, c) in conds.iter().enumerate() {
            if c.segment == s {
                mask.data[i * seg.len + c.class] = 1.0;
                any = true;
            }
        }
        if !any {
            continue;
        }
        let logits = g.slice_cols(raw, seg.offset, seg.len);
        let ls = g.log_softmax(logits);
        let m = g.constant(mask);
        let picked = g.mul(ls, m);
        let s = g.sum_all(picked);
        total = Some(match total {
            Some(t) => g.add(t, s),
            None => s,
        });
    }
    match total {
        Some(t) => g.scale(t, -1.0 / n as f64),
        None => g.constant(Tensor::scalar(0.0)),
    }
}

/// Mean losses over the steps of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub d: f64,
    pub g: f64,
    pub class: f64,
    pub info: f64,
    pub cond: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub epochs: Vec<EpochLosses>,
    /// Median critic gradient norm at the penalty interpolates, per epoch
    /// (gradient-penalty training only).
    pub gp_grad_norm_medians: Vec<f64>,
}

impl LossTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["epoch", "L_D", "L_G", "L_class", "L_info", "L_cond"])?;
        for e in &self.epochs {
            wtr.write_record([
                e.epoch.to_string(),
                e.d.to_string(),
                e.g.to_string(),
                e.class.to_string(),
                e.info.to_string(),
                e.cond.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<loss trace>", e))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}
