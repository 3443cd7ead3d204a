//! L2-regularized logistic regression fitted by damped Newton iterations.
//!
//! Objective: mean cross-entropy plus (lambda/2)||w||^2; the intercept is
//! not penalized. Newton steps fall back to line-searched gradient steps
//! whenever the Hessian solve fails or goes non-finite.

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

/// Regularized negative log-likelihood at (weights, intercept).
pub fn logistic_loss(x: &EncodedMatrix, y: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.n_rows() as f64;
    let mut nll = 0.0;
    for i in 0..x.n_rows() {
        let m: f64 = b + x.row(i).iter().zip(w).map(|(v, wi)| v * wi).sum::<f64>();
        // -[y m - log(1 + e^m)]
        nll += log1p_exp(m) - f64::from(y[i]) * m;
    }
    nll / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient: (X^T (p - y) / n + lambda w, mean(p - y)).
pub fn logistic_gradient(
    x: &EncodedMatrix,
    y: &[u8],
    w: &[f64],
    b: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let p_dim = x.n_cols();
    let mut gw = vec![0.0; p_dim];
    let mut gb = 0.0;
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let m: f64 = b + row.iter().zip(w).map(|(v, wi)| v * wi).sum::<f64>();
        let resid = sigmoid(m) - f64::from(y[i]);
        gb += resid;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += resid * v;
        }
    }
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    (gw, gb / n)
}

pub fn fit_logistic(
    x: &EncodedMatrix,
    y: &[u8],
    l2: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticModel> {
    let n = x.n_rows();
    let p = x.n_cols();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut loss = logistic_loss(x, y, &w, b, l2);

    for _ in 0..max_iter {
        let (gw, gb) = logistic_gradient(x, y, &w, b, l2);
        let grad_norm = (gw.iter().map(|v| v * v).sum::<f64>() + gb * gb).sqrt();
        if grad_norm <= tol {
            break;
        }

        // Newton direction on the (intercept, weights) system.
        let dim = p + 1;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            let row = x.row(i);
            let m: f64 = b + row.iter().zip(&w).map(|(v, wi)| v * wi).sum::<f64>();
            let pi = sigmoid(m);
            let s = (pi * (1.0 - pi)) / n as f64;
            h[(0, 0)] += s;
            for (a, &va) in row.iter().enumerate() {
                h[(0, a + 1)] += s * va;
                h[(a + 1, 0)] += s * va;
                for (c, &vc) in row.iter().enumerate() {
                    h[(a + 1, c + 1)] += s * va * vc;
                }
            }
        }
        for a in 0..p {
            h[(a + 1, a + 1)] += l2;
        }
        for d in 0..dim {
            h[(d, d)] += 1e-12;
        }
        let mut g = DVector::<f64>::zeros(dim);
        g[0] = gb;
        for (i, v) in gw.iter().enumerate() {
            g[i + 1] = *v;
        }

        let newton = h
            .cholesky()
            .map(|c| c.solve(&g))
            .filter(|d| d.iter().all(|v| v.is_finite()));

        let direction = match newton {
            Some(d) => d,
            // Hessian solve failed or went non-finite: raw gradient step.
            None => g.clone(),
        };

        // Step halving until the objective decreases.
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let w_try: Vec<f64> = w
                .iter()
                .enumerate()
                .map(|(i, wi)| wi - step * direction[i + 1])
                .collect();
            let b_try = b - step * direction[0];
            let loss_try = logistic_loss(x, y, &w_try, b_try, l2);
            if loss_try.is_finite() && loss_try < loss {
                w = w_try;
                b = b_try;
                loss = loss_try;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break; // no descent direction left at machine precision
        }
    }

    if !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
        return Err(Error::Numerical(
            "logistic fit produced non-finite parameters".to_string(),
        ));
    }
    Ok(LogisticModel {
        weights: w,
        intercept: b,
    })
}
