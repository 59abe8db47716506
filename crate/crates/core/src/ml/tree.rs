use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 28,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classifier with Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

struct Builder<'a, R: Rng + ?Sized> {
    x: &'a Tensor,
    y: &'a [usize],
    k: usize,
    cfg: TreeConfig,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64], n: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / n).powi(2)).sum::<f64>()
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let mut p = vec![0.0; self.k];
        for &i in idx {
            p[self.y[i]] += 1.0;
        }
        let n = idx.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= n);
        self.nodes.push(Node::Leaf(p));
        self.nodes.len() - 1
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let d = self.x.cols;
        let features: Vec<usize> = match self.cfg.max_features {
            Some(m) if m < d => sample_indices(self.rng, d, m.max(1)).into_vec(),
            _ => (0..d).collect(),
        };
        let n = idx.len() as f64;
        let mut total = vec![0.0; self.k];
        for &i in idx {
            total[self.y[i]] += 1.0;
        }
        let parent = gini(&total, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for &f in &features {
            let val = |i: usize| self.x.data[i * d + f];
            order.sort_by(|&a, &b| val(a).total_cmp(&val(b)));
            let mut left = vec![0.0; self.k];
            for pos in 0..order.len() - 1 {
                left[self.y[order[pos]]] += 1.0;
                let (v, next) = (val(order[pos]), val(order[pos + 1]));
                if v == next {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = n - nl;
                let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let imp = (nl * gini(&left, nl) + nr * gini(&right, nr)) / n;
                let gain = parent - imp;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (v + next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if pure || depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let d = self.x.cols;
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x.data[i * d + feature] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

impl DecisionTree {
    pub fn fit<R: Rng + ?Sized>(x: &Tensor, y: &[usize], n_classes: usize, cfg: TreeConfig, rng: &mut R) -> Self {
        Self::fit_indices(x, y, &(0..x.rows).collect::<Vec<_>>(), n_classes, cfg, rng)
    }

    /// Fits on the rows listed in `idx` (repeats allowed).
    pub fn fit_indices<R: Rng + ?Sized>(
        x: &Tensor,
        y: &[usize],
        idx: &[usize],
        n_classes: usize,
        cfg: TreeConfig,
        rng: &mut R,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            k: n_classes,
            cfg,
            rng,
            nodes: Vec::new(),
        };
        if idx.is_empty() {
            b.nodes.push(Node::Leaf(vec![1.0 / n_classes as f64; n_classes]));
        } else {
            b.build(idx, 0);
        }
        DecisionTree {
            nodes: b.nodes,
            n_classes,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_proba(&self, x: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(x.rows, self.n_classes);
        for i in 0..x.rows {
            out.row_mut(i).copy_from_slice(self.predict_row(x.row(i)));
        }
        out
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fits_xor_exactly() {
        let x = Tensor::from_vec(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let y = [0, 1, 1, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // greedy CART needs a tie-break on xor: duplicate one row
        let x2 = Tensor::from_vec(5, 2, [x.data.clone(), vec![0.0, 0.0]].concat());
        let t = DecisionTree::fit(&x2, &[0, 1, 1, 0, 0], 2, TreeConfig::default(), &mut rng);
        for i in 0..4 {
            assert_eq!(t.predict_row(x.row(i))[y[i]], 1.0);
        }
    }

    #[test]
    fn respects_max_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::randn(400, 3, 1.0, &mut rng);
        let y: Vec<usize> = (0..400).map(|_| rng.random_range(0..2)).collect();
        let deep = DecisionTree::fit(&x, &y, 2, TreeConfig::default(), &mut rng);
        assert!(deep.depth() <= 28 && deep.depth() > 3);
        let cfg = TreeConfig {
            max_depth: 3,
            ..TreeConfig::default()
        };
        assert_eq!(DecisionTree::fit(&x, &y, 2, cfg, &mut rng).depth(), 3);
    }
}
