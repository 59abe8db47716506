//! In-repo classifiers used for utility evaluation and attacks.

mod forest;
mod logistic;
mod mlp;
pub mod scoring;
mod tree;

pub use forest::{ForestConfig, RandomForest};
pub use logistic::LogisticRegression;
pub use mlp::{MlpClassifier, MlpClassifierConfig};
pub use tree::{DecisionTree, TreeConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::data::{Cell, ColumnKind, Table, TableSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    LogisticRegression,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::LogisticRegression,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Fits a fresh model and returns class probabilities for `test`.
    pub fn fit_predict(self, x: &Tensor, y: &[usize], n_classes: usize, test: &Tensor, seed: u64) -> Tensor {
        match self {
            ModelKind::DecisionTree => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                DecisionTree::fit(x, y, n_classes, TreeConfig::default(), &mut rng).predict_proba(test)
            }
            ModelKind::RandomForest => {
                let cfg = ForestConfig {
                    seed,
                    ..ForestConfig::default()
                };
                RandomForest::fit(x, y, n_classes, cfg).predict_proba(test)
            }
            ModelKind::LogisticRegression => LogisticRegression::fit(x, y, n_classes, 500, 1e-4).predict_proba(test),
            ModelKind::Mlp => {
                let cfg = MlpClassifierConfig {
                    seed,
                    ..MlpClassifierConfig::default()
                };
                MlpClassifier::fit(x, y, n_classes, cfg).predict_proba(test)
            }
        }
    }
}

/// Maps table rows (minus the target) to dense features: numeric values
/// min-max scaled by a reference table, categoricals one-hot, mixed columns
/// as scaled value plus a point/continuous/missing indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    schema: TableSchema,
    ranges: Vec<(f64, f64)>,
    target: usize,
}

impl FeatureEncoder {
    pub fn fit(reference: &Table) -> Result<Self> {
        let schema = reference.schema().clone();
        let target = schema.target_index();
        if schema.columns[target].kind != ColumnKind::Categorical {
            return Err(Error::InvalidSchema("target column must be categorical".into()));
        }
        let ranges = (0..schema.len())
            .map(|j| {
                reference
                    .numeric_values(j)
                    .into_iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)))
            })
            .collect();
        Ok(FeatureEncoder { schema, ranges, target })
    }

    pub fn n_classes(&self) -> usize {
        self.schema.columns[self.target].categorical_values.len()
    }

    pub fn width(&self) -> usize {
        self.schema
            .columns
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.target)
            .map(|(_, c)| match c.kind {
                ColumnKind::Continuous => 1,
                ColumnKind::Categorical => c.categorical_values.len() + 1,
                ColumnKind::Mixed => c.mixed_categorical_points.len() + 3,
            })
            .sum()
    }

    fn encode_row(&self, row: &[Cell], out: &mut Vec<f64>) {
        for (j, spec) in self.schema.columns.iter().enumerate() {
            if j == self.target {
                continue;
            }
            let (lo, hi) = self.ranges[j];
            let scale = |x: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
            match spec.kind {
                ColumnKind::Continuous => out.push(row[j].as_num().map_or(0.0, scale)),
                ColumnKind::Categorical => {
                    let k = spec.categorical_values.len();
                    let at = out.len();
                    out.extend(std::iter::repeat_n(0.0, k + 1));
                    out[at + row[j].as_cat().unwrap_or(k)] = 1.0;
                }
                ColumnKind::Mixed => {
                    let points = &spec.mixed_categorical_points;
                    out.push(row[j].as_num().map_or(0.0, scale));
                    let at = out.len();
                    out.extend(std::iter::repeat_n(0.0, points.len() + 2));
                    let slot = match row[j] {
                        Cell::Num(x) => points.iter().position(|&p| p == x).unwrap_or(points.len()),
                        _ => points.len() + 1,
                    };
                    out[at + slot] = 1.0;
                }
            }
        }
    }

    /// Features and target labels.
    pub fn transform(&self, t: &Table) -> Result<(Tensor, Vec<usize>)> {
        if !self.schema.compatible_with(t.schema()) {
            return Err(Error::SchemaMismatch("feature encoder fitted on another schema".into()));
        }
        let mut data = Vec::with_capacity(t.n_rows() * self.width());
        let mut labels = Vec::with_capacity(t.n_rows());
        for row in t.rows() {
            let Some(c) = row[self.target].as_cat() else {
                return Err(Error::InvalidSchema("target cell is not categorical".into()));
            };
            self.encode_row(row, &mut data);
            labels.push(c);
        }
        Ok((Tensor::from_vec(labels.len(), self.width(), data), labels))
    }
}
