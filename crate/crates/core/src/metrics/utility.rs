use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::error::{Error, Result};
use crate::ml::{scoring, FeatureEncoder, ModelKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub f1: f64,
    pub auc: f64,
    pub apr: f64,
}

impl Scores {
    fn minus(self, o: Scores) -> Scores {
        Scores {
            accuracy: self.accuracy - o.accuracy,
            f1: self.f1 - o.f1,
            auc: self.auc - o.auc,
            apr: self.apr - o.apr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUtility {
    pub model: ModelKind,
    pub real: Scores,
    pub synthetic: Scores,
    /// `real - synthetic`.
    pub diff: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub models: Vec<ModelUtility>,
    pub mean_diff: Scores,
}

/// Trains each model once on `real_train` and once on `synth_train`,
/// scores both on `test` and reports the differences. Features are scaled
/// by `real_train`.
pub fn ml_utility(
    real_train: &Table,
    synth_train: &Table,
    test: &Table,
    models: &[ModelKind],
    seed: u64,
) -> Result<UtilityReport> {
    let fe = FeatureEncoder::fit(real_train)?;
    let (xr, yr) = fe.transform(real_train)?;
    let (xs, ys) = fe.transform(synth_train)?;
    let (xt, yt) = fe.transform(test)?;
    for y in [&yr, &ys] {
        if y.iter().all(|&c| c == y[0]) {
            return Err(Error::SingleClassTrainingSet);
        }
    }
    let k = fe.n_classes();
    let score = |x, y: &[usize], model: ModelKind| {
        let p = model.fit_predict(x, y, k, &xt, seed);
        Scores {
            accuracy: scoring::accuracy(&yt, &p),
            f1: scoring::f1(&yt, &p),
            auc: scoring::auc(&yt, &p),
            apr: scoring::average_precision(&yt, &p),
        }
    };
    let mut out = Vec::new();
    for &m in models {
        let real = score(&xr, &yr, m);
        let synthetic = score(&xs, &ys, m);
        out.push(ModelUtility {
            model: m,
            real,
            synthetic,
            diff: real.minus(synthetic),
        });
    }
    let n = out.len().max(1) as f64;
    let mut mean = Scores::default();
    for m in &out {
        mean.accuracy += m.diff.accuracy / n;
        mean.f1 += m.diff.f1 / n;
        mean.auc += m.diff.auc / n;
        mean.apr += m.diff.apr / n;
    }
    Ok(UtilityReport {
        models: out,
        mean_diff: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cell, ColumnSpec, TableSchema};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(n: usize, seed: u64) -> Table {
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::categorical("c", ["a", "b", "c"]),
            ColumnSpec::categorical("y", ["0", "1"]).as_target(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let c = rng.random_range(0..3);
                let y = usize::from(x + 0.3 * c as f64 + rng.random_range(-0.3..0.3) > 0.2);
                vec![Cell::Num(x), Cell::Cat(c), Cell::Cat(y)]
            })
            .collect();
        Table::new(schema, rows).unwrap()
    }

    #[test]
    fn identical_training_sets_give_zero_diff() {
        let train = table(300, 1);
        let test = table(100, 2);
        let r = ml_utility(&train, &train, &test, &ModelKind::ALL, 7).unwrap();
        for m in &r.models {
            for d in [m.diff.accuracy, m.diff.f1, m.diff.auc, m.diff.apr] {
                assert!(d.abs() < 1e-6, "{:?}", m);
            }
            assert!(m.real.accuracy > 0.7, "{:?}", m);
        }
    }

    #[test]
    fn single_class_synthetic_is_rejected() {
        let train = table(100, 1);
        let rows: Vec<_> = train
            .rows()
            .iter()
            .map(|r| vec![r[0], r[1], Cell::Cat(0)])
            .collect();
        let synth = Table::new(train.schema().clone(), rows).unwrap();
        let err = ml_utility(&train, &synth, &train, &[ModelKind::DecisionTree], 0);
        assert!(matches!(err, Err(Error::SingleClassTrainingSet)));
    }
}
