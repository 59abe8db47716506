use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttackKind, AttackReport, GeneratorFactory, Repetition};
use crate::data::{ColumnKind, Table};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeAttackConfig {
    pub train_rows: usize,
    pub test_rows: usize,
    /// Success band as a fraction of the real column range.
    pub tolerance: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for AttributeAttackConfig {
    fn default() -> Self {
        AttributeAttackConfig {
            train_rows: 4900,
            test_rows: 100,
            tolerance: 0.1,
            repetitions: 5,
            seed: 0,
        }
    }
}

const RIDGE: f64 = 1e-8;

/// Design row for every column except `sensitive`: an intercept, numeric
/// values (missing as 0) and treatment-coded categoricals.
fn design(t: &Table, sensitive: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let schema = t.schema();
    let mut x = Vec::with_capacity(t.n_rows());
    let mut y = Vec::with_capacity(t.n_rows());
    for row in t.rows() {
        let mut d = vec![1.0];
        for (j, spec) in schema.columns.iter().enumerate() {
            if j == sensitive {
                continue;
            }
            match spec.kind {
                ColumnKind::Continuous | ColumnKind::Mixed => d.push(row[j].as_num().unwrap_or(0.0)),
                ColumnKind::Categorical => {
                    for k in 1..spec.categorical_values.len() {
                        d.push(f64::from(u8::from(row[j].as_cat() == Some(k))));
                    }
                }
            }
        }
        x.push(d);
        y.push(row[sensitive].as_num().unwrap_or(0.0));
    }
    (x, y)
}

/// Solves `(X^T X + ridge I) b = X^T y` by Cholesky factorization.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = x.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(Error::SingularDesign);
    }
    let mut a = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for (row, &t) in x.iter().zip(y) {
        for i in 0..p {
            rhs[i] += row[i] * t;
            for j in 0..=i {
                a[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        a[i * p + i] += RIDGE;
    }
    // lower-triangular factor in place
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularDesign);
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    let mut z = rhs;
    for i in 0..p {
        for k in 0..i {
            z[i] -= a[i * p + k] * z[k];
        }
        z[i] /= a[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            z[i] -= a[k * p + i] * z[k];
        }
        z[i] /= a[i * p + i];
    }
    Ok(z)
}

fn hit_rate(beta: &[f64], x: &[Vec<f64>], y: &[f64], kappa: f64) -> f64 {
    let hits = x
        .iter()
        .zip(y)
        .filter(|(row, &t)| {
            let pred: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            (pred - t).abs() <= kappa
        })
        .count();
    hits as f64 / y.len().max(1) as f64
}

/// Predicts `sensitive` from the other columns with regressions fitted on
/// real and on synthetic training rows; success is a prediction within
/// `tolerance * range` of the truth on held-out real rows.
pub fn attribute_attack(
    factory: &dyn GeneratorFactory,
    real: &Table,
    sensitive: &str,
    cfg: &AttributeAttackConfig,
) -> Result<AttackReport> {
    let j = real
        .schema()
        .index_of(sensitive)
        .ok_or_else(|| Error::InvalidAttackConfig(format!("unknown column {sensitive}")))?;
    if real.schema().columns[j].kind != ColumnKind::Continuous {
        return Err(Error::InvalidAttackConfig("sensitive column must be continuous".into()));
    }
    if cfg.train_rows == 0 || cfg.test_rows == 0 || cfg.train_rows + cfg.test_rows > real.n_rows() {
        return Err(Error::InvalidAttackConfig("train/test sizes do not fit the table".into()));
    }
    if cfg.repetitions == 0 || !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidAttackConfig("repetitions and tolerance must be positive".into()));
    }
    let values = real.numeric_values(j);
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let kappa = cfg.tolerance * (hi - lo);
    let mut reps = Vec::with_capacity(cfg.repetitions);
    for r in 0..cfg.repetitions {
        let seed = cfg.seed.wrapping_add(r as u64);
        let mut idx: Vec<usize> = (0..real.n_rows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let train = real.select(&idx[..cfg.train_rows]);
        let test = real.select(&idx[cfg.train_rows..cfg.train_rows + cfg.test_rows]);
        let synth = factory.train(&train, seed)?.sample(cfg.train_rows, seed)?;
        reps.push(attribute_attack_once(&train, &synth, &test, j, kappa)?);
    }
    Ok(AttackReport::from_repetitions(AttackKind::Attribute, reps))
}

fn attribute_attack_once(train: &Table, synth: &Table, test: &Table, j: usize, kappa: f64) -> Result<Repetition> {
    let (xr, yr) = design(train, j);
    let (xs, ys) = design(synth, j);
    let (xt, yt) = design(test, j);
    let br = fit_ols(&xr, &yr)?;
    let bs = fit_ols(&xs, &ys)?;
    Ok(Repetition::new(hit_rate(&br, &xt, &yt, kappa), hit_rate(&bs, &xt, &yt, kappa)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{ReplayFactory, Synthesizer};
    use crate::data::{Cell, ColumnSpec, TableSchema};
    use rand::Rng;

    fn table(n: usize) -> Table {
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("age"),
            ColumnSpec::continuous("x"),
            ColumnSpec::categorical("y", ["a", "b"]).as_target(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(0.0..10.0);
                let c = usize::from(rng.random_bool(0.5));
                let age = 3.0 * x + 5.0 * c as f64 + rng.random_range(-1.0..1.0);
                vec![Cell::Num(age), Cell::Num(x), Cell::Cat(c)]
            })
            .collect();
        Table::new(schema, rows).unwrap()
    }

    #[test]
    fn ols_recovers_coefficients() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64, (i * i % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 - r[1] + 0.5 * r[2]).collect();
        let b = fit_ols(&x, &y).unwrap();
        for (got, want) in b.iter().zip([2.0, -1.0, 0.5]) {
            assert!((got - want).abs() < 1e-6);
        }
        assert!(matches!(fit_ols(&[], &[]), Err(Error::SingularDesign)));
    }

    #[test]
    fn identical_synthetic_data_gives_zero_gain() {
        let cfg = AttributeAttackConfig {
            train_rows: 300,
            test_rows: 100,
            repetitions: 2,
            ..Default::default()
        };
        let rep = attribute_attack(&ReplayFactory, &table(400), "age", &cfg).unwrap();
        assert!(rep.privacy_gain.abs() < 1e-12, "{rep:?}");
        assert!(rep.p_real > 0.9);
    }

    struct Shuffled;
    struct ShuffledModel(Table);

    impl Synthesizer for ShuffledModel {
        fn sample(&self, _n: usize, seed: u64) -> Result<Table> {
            let mut ages = self.0.numeric_values(0);
            ages.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let rows = self
                .0
                .rows()
                .iter()
                .zip(ages)
                .map(|(r, a)| vec![Cell::Num(a), r[1], r[2]])
                .collect();
            Table::new(self.0.schema().clone(), rows)
        }
    }

    impl GeneratorFactory for Shuffled {
        fn train(&self, data: &Table, _seed: u64) -> Result<Box<dyn Synthesizer>> {
            Ok(Box::new(ShuffledModel(data.clone())))
        }
    }

    #[test]
    fn destroyed_association_gives_positive_gain() {
        let cfg = AttributeAttackConfig {
            train_rows: 300,
            test_rows: 100,
            repetitions: 2,
            ..Default::default()
        };
        let rep = attribute_attack(&Shuffled, &table(400), "age", &cfg).unwrap();
        assert!(rep.privacy_gain > 0.2, "{rep:?}");
        for r in &rep.repetitions {
            assert!((0.0..=1.0).contains(&r.p_fake));
        }
        assert!(attribute_attack(&Shuffled, &table(400), "y", &cfg).is_err());
    }
}
