use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::LeakyRelu(s) => g.leaky_relu(x, s),
            Activation::Tanh => g.tanh(x),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Layer widths including input and output, e.g. `[in, 256, 256, out]`.
    pub sizes: Vec<usize>,
    pub activation: Activation,
    /// Per-row layer normalization (with learned gain and bias) after
    /// every hidden linear layer.
    pub layer_norm: bool,
    /// Dropout probability after every hidden activation.
    pub dropout: f64,
}

/// Fully connected network. Parameters are stored flat as
/// `[W, b, (gain, bias)?]` per layer; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<Tensor>,
}

/// Outputs of a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct MlpOutput {
    pub out: Var,
    /// Activations of the last hidden layer.
    pub penultimate: Var,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl Mlp {
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut params = Vec::new();
        let n_layers = spec.sizes.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (spec.sizes[l], spec.sizes[l + 1]);
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            params.push(Tensor::uniform(fan_in, fan_out, bound, rng));
            params.push(Tensor::uniform(1, fan_out, bound, rng));
            if spec.layer_norm && l + 1 < n_layers {
                params.push(Tensor::full(1, fan_out, 1.0));
                params.push(Tensor::zeros(1, fan_out));
            }
        }
        Mlp { spec, params }
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Registers the parameters as graph leaves.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|p| g.leaf(p.clone())).collect()
    }

    /// Forward pass; dropout is applied only when `rng` is given.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        vars: &[Var],
        x: Var,
        mut rng: Option<&mut R>,
    ) -> MlpOutput {
        let n_layers = self.spec.sizes.len() - 1;
        let mut h = x;
        let mut penultimate = x;
        let mut p = 0;
        for l in 0..n_layers {
            let z = g.matmul(h, vars[p]);
            h = g.add_row(z, vars[p + 1]);
            p += 2;
            if l + 1 < n_layers {
                if self.spec.layer_norm {
                    let n = g.layer_norm(h, LAYER_NORM_EPS);
                    let scaled = {
                        let rows = g.shape(n).0;
                        let gain = g.broadcast_rows(vars[p], rows);
                        g.mul(n, gain)
                    };
                    h = g.add_row(scaled, vars[p + 1]);
                    p += 2;
                }
                h = self.spec.activation.apply(g, h);
                if let Some(r) = rng.as_deref_mut() {
                    h = g.dropout(h, self.spec.dropout, r);
                }
                penultimate = h;
            }
        }
        MlpOutput { out: h, penultimate }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &[Tensor], lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay: 0.0,
            t: 0,
            m: params.iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect(),
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.data.len() {
                let gi = g.data[i] + self.weight_decay * p.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * gi;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::ThreadRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = MlpSpec {
            sizes: vec![3, 5, 2],
            activation: Activation::Relu,
            layer_norm: true,
            dropout: 0.0,
        };
        let m = Mlp::new(spec, &mut rng);
        let shapes: Vec<_> = m.params.iter().map(Tensor::shape).collect();
        assert_eq!(shapes, vec![(3, 5), (1, 5), (1, 5), (1, 5), (5, 2), (1, 2)]);
        let mut g = Graph::new();
        let vars = m.bind(&mut g);
        let x = g.constant(Tensor::zeros(4, 3));
        let o = m.forward::<ThreadRng>(&mut g, &vars, x, None);
        assert_eq!(g.shape(o.out), (4, 2));
        assert_eq!(g.shape(o.penultimate), (4, 5));
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![Tensor::from_vec(1, 2, vec![3.0, -2.0])];
        let mut opt = Adam::new(&p, 0.05, 0.9, 0.999);
        for _ in 0..2000 {
            let grad = p[0].map(|x| 2.0 * x);
            opt.step(&mut p, &[grad]);
        }
        assert!(p[0].norm() < 1e-3);
    }

    #[test]
    fn mlp_learns_xor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec {
            sizes: vec![2, 16, 2],
            activation: Activation::Tanh,
            layer_norm: false,
            dropout: 0.0,
        };
        let mut m = Mlp::new(spec, &mut rng);
        let x = Tensor::from_vec(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let y = [0, 1, 1, 0];
        let mut opt = Adam::new(&m.params, 0.05, 0.9, 0.999);
        for _ in 0..500 {
            let mut g = Graph::new();
            let vars = m.bind(&mut g);
            let xv = g.constant(x.clone());
            let o = m.forward::<ThreadRng>(&mut g, &vars, xv, None);
            let loss = g.cross_entropy(o.out, &y).unwrap();
            let grads = g.backward(loss, &vars).unwrap();
            opt.step(&mut m.params, &grads);
        }
        let mut g = Graph::new();
        let vars = m.bind(&mut g);
        let xv = g.constant(x);
        let o = m.forward::<ThreadRng>(&mut g, &vars, xv, None);
        let out = g.value(o.out);
        for (i, &label) in y.iter().enumerate() {
            let r = out.row(i);
            assert_eq!(usize::from(r[1] > r[0]), label);
        }
    }
}
