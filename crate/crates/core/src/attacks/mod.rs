//! Black-box membership and attribute inference attacks against a
//! synthesizer.

mod attribute;
mod features;
mod membership;

pub use attribute::{attribute_attack, fit_ols, AttributeAttackConfig};
pub use features::{feature_extract, feature_extract_corr, feature_extract_naive, FeatureMode};
pub use membership::{membership_attack, membership_attack_once, MembershipAttackConfig};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Table, TableSchema};
use crate::error::{Error, Result};
use crate::gan::{GanModel, TrainConfig};
use crate::privacy::PrivacySpec;

/// A trained model that produces synthetic tables.
pub trait Synthesizer {
    fn sample(&self, n: usize, seed: u64) -> Result<Table>;
}

/// Black-box training access: fits a fresh synthesizer on `data`.
pub trait GeneratorFactory {
    fn train(&self, data: &Table, seed: u64) -> Result<Box<dyn Synthesizer>>;
}

impl Synthesizer for GanModel {
    fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        GanModel::sample(self, n, None, seed)
    }
}

/// Trains the non-private model.
#[derive(Debug, Clone)]
pub struct GanFactory(pub TrainConfig);

impl GeneratorFactory for GanFactory {
    fn train(&self, data: &Table, seed: u64) -> Result<Box<dyn Synthesizer>> {
        let cfg = TrainConfig {
            seed,
            ..self.0.clone()
        };
        let (model, _) = crate::gan::train(data, &cfg).map_err(|e| Error::GeneratorFailure(e.to_string()))?;
        Ok(Box::new(model))
    }
}

/// Trains a differentially private model.
#[derive(Debug, Clone)]
pub struct DpGanFactory(pub TrainConfig, pub PrivacySpec);

impl GeneratorFactory for DpGanFactory {
    fn train(&self, data: &Table, seed: u64) -> Result<Box<dyn Synthesizer>> {
        let cfg = TrainConfig {
            seed,
            ..self.0.clone()
        };
        let out = crate::privacy::train_dp(data, &cfg, &self.1).map_err(|e| Error::GeneratorFailure(e.to_string()))?;
        Ok(Box::new(out.model))
    }
}

/// "Generator" that returns its training rows: a seeded shuffle of the
/// rows, cycled when more rows are requested than were seen.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReplayFactory;

struct Replay(Table);

impl Synthesizer for Replay {
    fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..self.0.n_rows()).collect();
        idx.shuffle(&mut rng);
        let picks: Vec<usize> = idx.iter().cycle().take(n).copied().collect();
        Ok(self.0.select(&picks))
    }
}

impl GeneratorFactory for ReplayFactory {
    fn train(&self, data: &Table, _seed: u64) -> Result<Box<dyn Synthesizer>> {
        if data.is_empty() {
            return Err(Error::GeneratorFailure("cannot replay an empty table".into()));
        }
        Ok(Box::new(Replay(data.clone())))
    }
}

/// "Generator" that ignores its training rows and emits seeded noise with
/// the right schema.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoiseFactory;

struct Noise(TableSchema);

impl Synthesizer for Noise {
    fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                self.0
                    .columns
                    .iter()
                    .map(|c| match c.kind {
                        ColumnKind::Categorical => Cell::Cat(rng.random_range(0..c.categorical_values.len().max(1))),
                        _ => Cell::Num(rng.random_range(0.0..1.0)),
                    })
                    .collect()
            })
            .collect();
        Table::new(self.0.clone(), rows)
    }
}

impl GeneratorFactory for NoiseFactory {
    fn train(&self, data: &Table, _seed: u64) -> Result<Box<dyn Synthesizer>> {
        Ok(Box::new(Noise(data.schema().clone())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub p_real: f64,
    pub p_fake: f64,
    pub privacy_gain: f64,
}

impl Repetition {
    pub fn new(p_real: f64, p_fake: f64) -> Self {
        Repetition {
            p_real,
            p_fake,
            privacy_gain: privacy_gain(p_real, p_fake),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Membership,
    Attribute,
}

/// Averages over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub kind: AttackKind,
    pub p_real: f64,
    pub p_fake: f64,
    pub privacy_gain: f64,
    pub repetitions: Vec<Repetition>,
}

impl AttackReport {
    pub fn from_repetitions(kind: AttackKind, repetitions: Vec<Repetition>) -> Self {
        let n = repetitions.len().max(1) as f64;
        let p_real = repetitions.iter().map(|r| r.p_real).sum::<f64>() / n;
        let p_fake = repetitions.iter().map(|r| r.p_fake).sum::<f64>() / n;
        AttackReport {
            kind,
            p_real,
            p_fake,
            privacy_gain: privacy_gain(p_real, p_fake),
            repetitions,
        }
    }
}

/// Half the drop in attack success from real to synthetic data.
pub fn privacy_gain(p_real: f64, p_fake: f64) -> f64 {
    (p_real - p_fake) / 2.0
}
