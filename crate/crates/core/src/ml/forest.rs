use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeConfig};
use crate::autodiff::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features per split; `None` uses `sqrt(d)`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 20,
            max_depth: 28,
            max_features: None,
            seed: 0,
        }
    }
}

/// Bootstrap-aggregated CART trees with feature bagging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl RandomForest {
    pub fn fit(x: &Tensor, y: &[usize], n_classes: usize, cfg: ForestConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let m = cfg
            .max_features
            .unwrap_or_else(|| ((x.cols as f64).sqrt().round() as usize).max(1));
        let tree_cfg = TreeConfig {
            max_depth: cfg.max_depth,
            min_samples_split: 2,
            max_features: Some(m),
        };
        let trees = (0..cfg.n_trees)
            .map(|_| {
                let idx: Vec<usize> = (0..x.rows).map(|_| rng.random_range(0..x.rows)).collect();
                DecisionTree::fit_indices(x, y, &idx, n_classes, tree_cfg, &mut rng)
            })
            .collect();
        RandomForest { trees, n_classes }
    }

    pub fn predict_proba(&self, x: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(x.rows, self.n_classes);
        let k = self.trees.len().max(1) as f64;
        for i in 0..x.rows {
            let row = x.row(i);
            let acc = out.row_mut(i);
            for t in &self.trees {
                for (a, p) in acc.iter_mut().zip(t.predict_row(row)) {
                    *a += p / k;
                }
            }
        }
        out
    }
}
