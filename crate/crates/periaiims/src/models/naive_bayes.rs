//! Mixed naive Bayes: Gaussian per scaled-numeric column, Bernoulli with
//! Laplace smoothing per one-hot or binary column.

use crate::error::{Error, Result};
use crate::ingest::{EncodedMatrix, EncodingRole};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnStats {
    Gaussian { mean: [f64; 2], var: [f64; 2] },
    Bernoulli { p_one: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub log_prior: [f64; 2],
    pub columns: Vec<ColumnStats>,
}

pub fn fit_naive_bayes(
    x: &EncodedMatrix,
    y: &[u8],
    laplace_alpha: f64,
    var_floor: f64,
) -> Result<NaiveBayesModel> {
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput("naive bayes needs rows".to_string()));
    }
    let counts = [
        y.iter().filter(|&&v| v == 0).count(),
        y.iter().filter(|&&v| v == 1).count(),
    ];
    // Smoothed priors keep a missing class representable rather than fatal.
    let log_prior = [
        ((counts[0] as f64 + 1e-12) / (n as f64 + 2e-12)).ln(),
        ((counts[1] as f64 + 1e-12) / (n as f64 + 2e-12)).ln(),
    ];

    let mut columns = Vec::with_capacity(x.n_cols());
    for c in 0..x.n_cols() {
        let gaussian = matches!(x.columns[c].role, EncodingRole::ScaledNumeric { .. });
        if gaussian {
            let mut mean = [0.0; 2];
            let mut var = [var_floor; 2];
            for class in 0..2 {
                let vals: Vec<f64> = (0..n)
                    .filter(|&i| usize::from(y[i]) == class)
                    .map(|i| x.get(i, c))
                    .collect();
                if vals.is_empty() {
                    mean[class] = 0.5;
                    var[class] = 1.0;
                    continue;
                }
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let v = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
                mean[class] = m;
                var[class] = v.max(var_floor);
            }
            columns.push(ColumnStats::Gaussian { mean, var });
        } else {
            let mut p_one = [0.5; 2];
            for class in 0..2 {
                let (mut ones, mut total) = (0.0, 0.0);
                for i in 0..n {
                    if usize::from(y[i]) == class {
                        total += 1.0;
                        if x.get(i, c) != 0.0 {
                            ones += 1.0;
                        }
                    }
                }
                p_one[class] = (ones + laplace_alpha) / (total + 2.0 * laplace_alpha);
            }
            columns.push(ColumnStats::Bernoulli { p_one });
        }
    }

    Ok(NaiveBayesModel { log_prior, columns })
}

impl NaiveBayesModel {
    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        let mut log_like = self.log_prior;
        for (stats, &v) in self.columns.iter().zip(row) {
            match stats {
                ColumnStats::Gaussian { mean, var } => {
                    for class in 0..2 {
                        let d = v - mean[class];
                        log_like[class] += -0.5 * (2.0 * std::f64::consts::PI * var[class]).ln()
                            - d * d / (2.0 * var[class]);
                    }
                }
                ColumnStats::Bernoulli { p_one } => {
                    for class in 0..2 {
                        let p = p_one[class].clamp(1e-12, 1.0 - 1e-12);
                        log_like[class] += if v != 0.0 { p.ln() } else { (1.0 - p).ln() };
                    }
                }
            }
        }
        let m = log_like[0].max(log_like[1]);
        let e0 = (log_like[0] - m).exp();
        let e1 = (log_like[1] - m).exp();
        e1 / (e0 + e1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::testutil::matrix_from;

    #[test]
    fn symmetric_gaussians_give_half_at_midpoint() {
        let x = matrix_from(&[&[0.0], &[0.2], &[0.8], &[1.0]]);
        let y = [0, 0, 1, 1];
        let model = fit_naive_bayes(&x, &y, 1.0, 1e-9).unwrap();
        let p = model.predict_proba_row(&[0.5]);
        assert!((p - 0.5).abs() < 1e-9, "midpoint probability {p}");
    }

    #[test]
    fn single_class_degrades_gracefully() {
        let x = matrix_from(&[&[0.1], &[0.3], &[0.9]]);
        let y = [1, 1, 1];
        let model = fit_naive_bayes(&x, &y, 1.0, 1e-9).unwrap();
        let p = model.predict_proba_row(&[0.4]);
        assert!(
            p > 0.99,
            "all-positive training data must predict positive, got {p}"
        );
    }

    #[test]
    fn variance_floor_prevents_degenerate_spikes() {
        let x = matrix_from(&[&[0.5], &[0.5], &[0.4], &[0.6]]);
        let y = [1, 1, 0, 0];
        let model = fit_naive_bayes(&x, &y, 1.0, 1e-9).unwrap();
        let p = model.predict_proba_row(&[0.5001]);
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }
}
