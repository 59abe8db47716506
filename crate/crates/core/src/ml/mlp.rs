use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Adam, Graph, Mlp, MlpSpec, Tensor};

/// One-hidden-layer perceptron classifier trained with minibatch Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    net: Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for MlpClassifierConfig {
    fn default() -> Self {
        MlpClassifierConfig {
            hidden: 128,
            epochs: 200,
            batch_size: 200,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl MlpClassifier {
    pub fn fit(x: &Tensor, y: &[usize], n_classes: usize, cfg: MlpClassifierConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let spec = MlpSpec {
            sizes: vec![x.cols, cfg.hidden, n_classes],
            activation: Activation::Relu,
            layer_norm: false,
            dropout: 0.0,
        };
        let mut net = Mlp::new(spec, &mut rng);
        let mut opt = Adam::new(&net.params, cfg.lr, 0.9, 0.999).with_weight_decay(1e-4);
        let mut order: Vec<usize> = (0..x.rows).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size.max(1)) {
                let mut g = Graph::new();
                let vars = net.bind(&mut g);
                let xb = g.constant(x.gather_rows(chunk));
                let labels: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                let out = net.forward::<ChaCha8Rng>(&mut g, &vars, xb, None).out;
                let loss = g.cross_entropy(out, &labels).expect("labels checked by caller");
                let grads = g.backward(loss, &vars).expect("scalar loss");
                opt.step(&mut net.params, &grads);
            }
        }
        MlpClassifier { net }
    }

    pub fn predict_proba(&self, x: &Tensor) -> Tensor {
        let mut g = Graph::new();
        let vars: Vec<_> = self.net.params.iter().map(|p| g.constant(p.clone())).collect();
        let xv = g.constant(x.clone());
        let out = self.net.forward::<ChaCha8Rng>(&mut g, &vars, xv, None).out;
        let p = g.softmax(out);
        g.value(p).clone()
    }

    pub fn hidden_width(&self) -> usize {
        self.net.spec.sizes[1]
    }
}
