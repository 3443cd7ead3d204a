//! One-hidden-layer perceptron: rectifier activation, sigmoid output,
//! cross-entropy loss, seeded mini-batch gradient descent with L2 decay.

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::models::logistic::sigmoid;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_lambda: f64,
}

/// Row-major weight storage: w1[h * n_in + j], w2[h].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_in: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpModel {
    /// Uniform(+-sqrt(6/(fan_in+fan_out))) initialization, seeded.
    pub fn init(n_in: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound1 = (6.0 / (n_in + hidden) as f64).sqrt();
        let bound2 = (6.0 / (hidden + 1) as f64).sqrt();
        MlpModel {
            n_in,
            hidden,
            w1: (0..hidden * n_in)
                .map(|_| rng.gen_range(-bound1..bound1))
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden)
                .map(|_| rng.gen_range(-bound2..bound2))
                .collect(),
            b2: 0.0,
        }
    }

    fn hidden_pre(&self, row: &[f64], h: usize) -> f64 {
        self.b1[h]
            + row
                .iter()
                .enumerate()
                .map(|(j, &v)| self.w1[h * self.n_in + j] * v)
                .sum::<f64>()
    }

    pub fn forward(&self, row: &[f64]) -> f64 {
        let mut out = self.b2;
        for h in 0..self.hidden {
            let a = self.hidden_pre(row, h).max(0.0);
            out += self.w2[h] * a;
        }
        sigmoid(out)
    }

    /// Flattened parameter vector (w1, b1, w2, b2).
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w1.clone();
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (n1, nh) = (self.w1.len(), self.hidden);
        self.w1.copy_from_slice(&p[..n1]);
        self.b1.copy_from_slice(&p[n1..n1 + nh]);
        self.w2.copy_from_slice(&p[n1 + nh..n1 + nh + nh]);
        self.b2 = p[n1 + 2 * nh];
    }

    /// Mean cross-entropy over the rows plus L2 on the weight matrices.
    pub fn loss(&self, x: &EncodedMatrix, y: &[u8], rows: &[usize], l2: f64) -> f64 {
        let mut total = 0.0;
        for &i in rows {
            let p = self.forward(x.row(i)).clamp(1e-12, 1.0 - 1e-12);
            total -= if y[i] == 1 { p.ln() } else { (1.0 - p).ln() };
        }
        let reg: f64 = self.w1.iter().chain(&self.w2).map(|w| w * w).sum();
        total / rows.len() as f64 + 0.5 * l2 * reg
    }

    /// Analytic gradient of `loss` over the rows, flattened like `params`.
    pub fn gradient(&self, x: &EncodedMatrix, y: &[u8], rows: &[usize], l2: f64) -> Vec<f64> {
        let n = rows.len() as f64;
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; self.hidden];
        let mut gw2 = vec![0.0; self.hidden];
        let mut gb2 = 0.0;

        for &i in rows {
            let row = x.row(i);
            let mut act = vec![0.0; self.hidden];
            let mut out = self.b2;
            for h in 0..self.hidden {
                act[h] = self.hidden_pre(row, h).max(0.0);
                out += self.w2[h] * act[h];
            }
            let delta = sigmoid(out) - f64::from(y[i]);
            gb2 += delta;
            for h in 0..self.hidden {
                gw2[h] += delta * act[h];
                if act[h] > 0.0 {
                    let dh = delta * self.w2[h];
                    gb1[h] += dh;
                    for (j, &v) in row.iter().enumerate() {
                        gw1[h * self.n_in + j] += dh * v;
                    }
                }
            }
        }

        let mut g = Vec::with_capacity(self.w1.len() + 2 * self.hidden + 1);
        g.extend(gw1.iter().zip(&self.w1).map(|(gv, w)| gv / n + l2 * w));
        g.extend(gb1.iter().map(|gv| gv / n));
        g.extend(gw2.iter().zip(&self.w2).map(|(gv, w)| gv / n + l2 * w));
        g.push(gb2 / n);
        g
    }
}

pub fn fit_mlp(x: &EncodedMatrix, y: &[u8], params: &MlpParams, seed: u64) -> Result<MlpModel> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput("mlp needs rows".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::init(x.n_cols(), params.hidden_width, &mut rng);
    let mut order: Vec<usize> = (0..x.n_rows()).collect();

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let grad = model.gradient(x, y, batch, params.l2_lambda);
            let mut p = model.params();
            for (pv, gv) in p.iter_mut().zip(&grad) {
                *pv -= params.learning_rate * gv;
            }
            model.set_params(&p);
        }
    }

    if model.params().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "mlp training diverged to non-finite weights".to_string(),
        ));
    }
    Ok(model)
}
