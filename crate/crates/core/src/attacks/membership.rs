use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{feature_extract, AttackKind, AttackReport, FeatureMode, GeneratorFactory, Repetition};
use crate::autodiff::Tensor;
use crate::data::{Cell, Table};
use crate::error::{Error, Result};
use crate::ml::{ForestConfig, RandomForest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MembershipAttackConfig {
    /// Synthetic batches in total, half from each model.
    pub batches: usize,
    pub batch_rows: usize,
    pub feature_mode: FeatureMode,
    pub forest: ForestConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for MembershipAttackConfig {
    fn default() -> Self {
        MembershipAttackConfig {
            batches: 1200,
            batch_rows: 400,
            feature_mode: FeatureMode::Naive,
            forest: ForestConfig {
                n_trees: 50,
                max_depth: 10,
                max_features: None,
                seed: 0,
            },
            train_size: 1000,
            test_size: 200,
            seed: 0,
        }
    }
}

impl MembershipAttackConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidAttackConfig(m.into()));
        if self.batch_rows == 0 {
            return bad("batch_rows must be positive");
        }
        if self.train_size % 2 != 0 || self.test_size % 2 != 0 || self.test_size == 0 || self.train_size == 0 {
            return bad("train and test sizes must be positive and even");
        }
        if self.batches % 2 != 0 || self.batches / 2 < (self.train_size + self.test_size) / 2 {
            return bad("not enough batches for balanced train and test splits");
        }
        Ok(())
    }
}

fn contains_row(r: &Table, t: &[Cell]) -> bool {
    r.rows().iter().any(|row| row.as_slice() == t)
}

/// One attack against `target`: trains on `reference` and on
/// `reference + target`, labels their batches 0 and 1 and scores a random
/// forest on a held-out balanced split. Returns `P_fake`.
pub fn membership_attack_once(
    factory: &dyn GeneratorFactory,
    reference: &Table,
    target: &[Cell],
    cfg: &MembershipAttackConfig,
) -> Result<f64> {
    cfg.validate()?;
    if contains_row(reference, target) {
        return Err(Error::InvalidAttackConfig("target row is already in the reference set".into()));
    }
    let with_t = reference.concat(&Table::new(reference.schema().clone(), vec![target.to_vec()])?)?;
    let m0 = factory.train(reference, cfg.seed)?;
    let m1 = factory.train(&with_t, cfg.seed)?;
    let half = cfg.batches / 2;
    let mut per_class: [Vec<Vec<f64>>; 2] = [Vec::with_capacity(half), Vec::with_capacity(half)];
    for k in 0..half as u64 {
        for (label, m) in [&m0, &m1].into_iter().enumerate() {
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(2 * k + label as u64);
            let batch = m.sample(cfg.batch_rows, seed)?;
            per_class[label].push(feature_extract(&batch, cfg.feature_mode));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    per_class.iter_mut().for_each(|c| c.shuffle(&mut rng));
    let (tr_half, te_half) = (cfg.train_size / 2, cfg.test_size / 2);
    let width = per_class[0].first().map_or(0, Vec::len);
    let build = |range: std::ops::Range<usize>| {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (label, feats) in per_class.iter().enumerate() {
            for f in &feats[range.clone()] {
                data.extend_from_slice(f);
                labels.push(label);
            }
        }
        (Tensor::from_vec(labels.len(), width, data), labels)
    };
    let (x_train, y_train) = build(0..tr_half);
    let (x_test, y_test) = build(tr_half..tr_half + te_half);
    let forest_cfg = ForestConfig {
        seed: cfg.seed,
        ..cfg.forest
    };
    let forest = RandomForest::fit(&x_train, &y_train, 2, forest_cfg);
    let p = forest.predict_proba(&x_test);
    Ok(crate::ml::scoring::accuracy(&y_test, &p))
}

/// Repeats the attack once per target and averages. The attacker with
/// access to the real data always succeeds, so `P_real = 1`.
pub fn membership_attack(
    factory: &dyn GeneratorFactory,
    reference: &Table,
    targets: &[Vec<Cell>],
    cfg: &MembershipAttackConfig,
) -> Result<AttackReport> {
    if targets.is_empty() {
        return Err(Error::InvalidAttackConfig("no target rows".into()));
    }
    let reps = targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let c = MembershipAttackConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            membership_attack_once(factory, reference, t, &c).map(|p| Repetition::new(1.0, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttackReport::from_repetitions(AttackKind::Membership, reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{NoiseFactory, ReplayFactory};
    use crate::data::{ColumnSpec, TableSchema};
    use rand::Rng;

    fn reference(n: usize) -> (Table, Vec<Vec<Cell>>) {
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::categorical("y", ["a", "b"]).as_target(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rows: Vec<Vec<Cell>> = (0..n + 2)
            .map(|_| vec![Cell::Num(rng.random_range(0.0..10.0)), Cell::Cat(usize::from(rng.random_bool(0.5)))])
            .collect();
        let targets = rows.split_off(n);
        (Table::new(schema, rows).unwrap(), targets)
    }

    fn small() -> MembershipAttackConfig {
        MembershipAttackConfig {
            batches: 240,
            batch_rows: 50,
            train_size: 200,
            test_size: 40,
            forest: ForestConfig {
                n_trees: 10,
                max_depth: 10,
                max_features: None,
                seed: 0,
            },
            ..MembershipAttackConfig::default()
        }
    }

    #[test]
    fn replay_leaks_and_noise_does_not() {
        let (r, targets) = reference(50);
        let leak = membership_attack(&ReplayFactory, &r, &targets, &small()).unwrap();
        assert!(leak.privacy_gain < 0.15, "{leak:?}");
        let safe = membership_attack(&NoiseFactory, &r, &targets, &small()).unwrap();
        assert!((safe.privacy_gain - 0.25).abs() < 0.1, "{safe:?}");
        assert_eq!(safe.repetitions.len(), 2);
        assert_eq!(safe.p_real, 1.0);
    }

    #[test]
    fn rejects_target_inside_reference() {
        let (r, _) = reference(20);
        let t = r.row(3).to_vec();
        assert!(matches!(
            membership_attack_once(&NoiseFactory, &r, &t, &small()),
            Err(Error::InvalidAttackConfig(_))
        ));
        let bad = MembershipAttackConfig {
            batches: 100,
            ..small()
        };
        assert!(bad.validate().is_err());
    }
}
