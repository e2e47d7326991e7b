use serde::{Deserialize, Serialize};

use crate::learners::encoding::FeatureEncoder;
use crate::domain::{Dataset, FeatureRow};
use crate::numeric::pairwise_sum_by;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { learning_rate: 0.1, iterations: 500, l2: 1e-4 }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    encoder: FeatureEncoder,
    weights: Vec<f64>,
    bias: f64,
}

impl LogisticModel {
    /// Full-batch gradient descent from zero weights for a fixed number of steps.
    /// The L2 penalty applies to the weights, not the bias.
    pub fn fit(d: &Dataset, params: &LogisticParams) -> Self {
        let encoder = FeatureEncoder::fit(d);
        let width = encoder.width();
        let n = d.len();
        // column-major copy so each gradient coordinate is one contiguous reduction
        let mut columns = vec![vec![0.0; n]; width];
        let mut buf = Vec::with_capacity(width);
        for (i, row) in d.rows().iter().enumerate() {
            buf.clear();
            encoder.encode_into(row, &mut buf);
            for (j, x) in buf.iter().enumerate() {
                columns[j][i] = *x;
            }
        }
        let labels: Vec<f64> = d.labels().iter().map(|&y| f64::from(y)).collect();

        let mut weights = vec![0.0; width];
        let mut bias = 0.0;
        let mut logits = vec![0.0; n];
        let mut residual = vec![0.0; n];
        let inv_n = 1.0 / n as f64;
        for _ in 0..params.iterations {
            logits.iter_mut().for_each(|z| *z = bias);
            for (w, col) in weights.iter().zip(&columns) {
                if *w != 0.0 {
                    for (z, x) in logits.iter_mut().zip(col) {
                        *z += w * x;
                    }
                }
            }
            for i in 0..n {
                residual[i] = sigmoid(logits[i]) - labels[i];
            }
            let grad_bias = pairwise_sum_by(n, &|i| residual[i]) * inv_n;
            for (w, col) in weights.iter_mut().zip(&columns) {
                let g = pairwise_sum_by(n, &|i| residual[i] * col[i]) * inv_n + params.l2 * *w;
                *w -= params.learning_rate * g;
            }
            bias -= params.learning_rate * grad_bias;
        }
        LogisticModel { encoder, weights, bias }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn probability(&self, row: &FeatureRow) -> f64 {
        let x = self.encoder.encode(row);
        let z = self.bias + self.weights.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>();
        sigmoid(z)
    }
}
