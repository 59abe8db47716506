use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Tensor};

/// Multinomial logistic regression trained by full-batch Adam with a
/// small L2 penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    weights: Tensor,
    bias: Tensor,
}

fn softmax_rows(z: &mut Tensor) {
    for i in 0..z.rows {
        let r = z.row_mut(i);
        let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in r.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        r.iter_mut().for_each(|v| *v /= s);
    }
}

impl LogisticRegression {
    pub fn fit(x: &Tensor, y: &[usize], n_classes: usize, iterations: usize, l2: f64) -> Self {
        let mut params = vec![Tensor::zeros(x.cols, n_classes), Tensor::zeros(1, n_classes)];
        let mut opt = Adam::new(&params, 0.05, 0.9, 0.999);
        let n = x.rows as f64;
        for _ in 0..iterations {
            let mut p = Self::logits(x, &params[0], &params[1]);
            softmax_rows(&mut p);
            for (i, &label) in y.iter().enumerate() {
                p.data[i * n_classes + label] -= 1.0;
            }
            let mut gw = Tensor::matmul(x, &p, true, false);
            for (g, w) in gw.data.iter_mut().zip(&params[0].data) {
                *g = *g / n + l2 * w;
            }
            let mut gb = Tensor::zeros(1, n_classes);
            for i in 0..p.rows {
                for (b, v) in gb.data.iter_mut().zip(p.row(i)) {
                    *b += v / n;
                }
            }
            opt.step(&mut params, &[gw, gb]);
        }
        let bias = params.pop().expect("two parameters");
        let weights = params.pop().expect("two parameters");
        LogisticRegression { weights, bias }
    }

    fn logits(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        let mut z = Tensor::matmul(x, w, false, false);
        for i in 0..z.rows {
            for (v, bb) in z.row_mut(i).iter_mut().zip(&b.data) {
                *v += bb;
            }
        }
        z
    }

    pub fn predict_proba(&self, x: &Tensor) -> Tensor {
        let mut z = Self::logits(x, &self.weights, &self.bias);
        softmax_rows(&mut z);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_data_is_fit_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::randn(300, 3, 1.0, &mut rng);
        let y: Vec<usize> = (0..300)
            .map(|i| {
                let r = x.row(i);
                let s = 2.0 * r[0] - r[1] + 0.5 * r[2];
                usize::from(s > 0.0)
            })
            .collect();
        let m = LogisticRegression::fit(&x, &y, 2, 8000, 0.0);
        let p = m.predict_proba(&x);
        let correct = (0..300).filter(|&i| usize::from(p.row(i)[1] > 0.5) == y[i]).count();
        assert_eq!(correct, 300);
    }
}
