//! Pearson correlation matrices over intraoperative variables, effect-size
//! banding, network construction, and the disruption detector that compares
//! attribution directionality against baseline correlation signs.

use crate::data::{Cohort, OutcomeKind, INTRAOP_NUMERICS};
use crate::error::{Error, Result};
use crate::explain::FeatureImpact;
use serde::{Deserialize, Serialize};

/// Pairwise-complete Pearson correlations over a variable list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    pub variables: Vec<String>,
    /// Symmetric, unit diagonal, entries in [-1, 1].
    pub r: Vec<Vec<f64>>,
    /// Rows with every variable present (the all-complete count).
    pub n_used: usize,
}

impl CorrMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        Some(self.r[i][j])
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![String::new()];
        header.extend(self.variables.clone());
        w.write_record(&header)?;
        for (i, var) in self.variables.iter().enumerate() {
            let mut rec = vec![var.clone()];
            rec.extend(self.r[i].iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Effect-size band of |r|: high > 0.5, moderate in (0.3, 0.5], low in
/// [0.1, 0.3], negligible below 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandStrength {
    High,
    Moderate,
    Low,
    Negligible,
}

/// Band plus sign. The band boundaries are pinned constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrBand {
    pub strength: BandStrength,
    /// True for r >= 0.
    pub positive: bool,
}

pub const BAND_HIGH: f64 = 0.5;
pub const BAND_MODERATE: f64 = 0.3;
pub const BAND_LOW: f64 = 0.1;

/// Total, deterministic banding of r in [-1, 1].
pub fn categorize(r: f64) -> CorrBand {
    let a = r.abs();
    let strength = if a > BAND_HIGH {
        BandStrength::High
    } else if a > BAND_MODERATE {
        BandStrength::Moderate
    } else if a >= BAND_LOW {
        BandStrength::Low
    } else {
        BandStrength::Negligible
    };
    CorrBand {
        strength,
        positive: r >= 0.0,
    }
}

/// Two-pass pairwise-complete Pearson over the named numeric variables.
/// Requires at least 3 complete rows per pair and positive variance per
/// variable.
pub fn pearson_matrix(cohort: &Cohort, variables: &[&str]) -> Result<CorrMatrix> {
    let idx: Vec<usize> = variables
        .iter()
        .map(|v| {
            cohort
                .registry
                .index_of(v)
                .ok_or_else(|| Error::Schema(format!("unknown variable {v}")))
        })
        .collect::<Result<_>>()?;
    let k = idx.len();

    // Per-variable variance check on that variable's complete rows.
    for (v, &fi) in variables.iter().zip(&idx) {
        let vals: Vec<f64> = (0..cohort.n_rows())
            .filter_map(|r| cohort.numeric(r, fi))
            .collect();
        if vals.len() < 3 {
            return Err(Error::Degenerate(format!(
                "variable {v} has {} complete rows; need at least 3",
                vals.len()
            )));
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        if var <= 0.0 {
            return Err(Error::Degenerate(format!("variable {v} has zero variance")));
        }
    }

    let mut r = vec![vec![0.0; k]; k];
    for i in 0..k {
        r[i][i] = 1.0;
        for j in 0..i {
            let pairs: Vec<(f64, f64)> = (0..cohort.n_rows())
                .filter_map(|row| {
                    Some((cohort.numeric(row, idx[i])?, cohort.numeric(row, idx[j])?))
                })
                .collect();
            if pairs.len() < 3 {
                return Err(Error::Degenerate(format!(
                    "pair ({}, {}) has {} complete rows; need at least 3",
                    variables[i],
                    variables[j],
                    pairs.len()
                )));
            }
            let n = pairs.len() as f64;
            let mx = pairs.iter().map(|(a, _)| a).sum::<f64>() / n;
            let my = pairs.iter().map(|(_, b)| b).sum::<f64>() / n;
            let mut cov = 0.0;
            let mut vx = 0.0;
            let mut vy = 0.0;
            for (a, b) in &pairs {
                cov += (a - mx) * (b - my);
                vx += (a - mx) * (a - mx);
                vy += (b - my) * (b - my);
            }
            if vx <= 0.0 || vy <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "pair ({}, {}) has a zero-variance side",
                    variables[i], variables[j]
                )));
            }
            let rij = (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0);
            r[i][j] = rij;
            r[j][i] = rij;
        }
    }

    let n_used = (0..cohort.n_rows())
        .filter(|&row| idx.iter().all(|&fi| cohort.numeric(row, fi).is_some()))
        .count();

    Ok(CorrMatrix {
        variables: variables.iter().map(|s| s.to_string()).collect(),
        r,
        n_used,
    })
}

/// Convenience: the correlation matrix over the eight intraoperative
/// numerics.
pub fn intraop_pearson(cohort: &Cohort) -> Result<CorrMatrix> {
    pearson_matrix(cohort, &INTRAOP_NUMERICS)
}

/// One non-negligible correlation edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrEdge {
    pub a: String,
    pub b: String,
    pub r: f64,
    pub band: CorrBand,
}

impl CorrEdge {
    /// Rendering hint: solid for positive, dotted for negative.
    pub fn line_style(&self) -> &'static str {
        if self.band.positive {
            "solid"
        } else {
            "dotted"
        }
    }
}

/// Nodes are variables; edges are every non-negligible pair, in variable
/// order. No self-edges; fully determined by the matrix and banding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<CorrEdge>,
}

pub fn build_network(m: &CorrMatrix) -> CorrelationNetwork {
    let mut edges = Vec::new();
    for i in 0..m.variables.len() {
        for j in (i + 1)..m.variables.len() {
            let band = categorize(m.r[i][j]);
            if band.strength != BandStrength::Negligible {
                edges.push(CorrEdge {
                    a: m.variables[i].clone(),
                    b: m.variables[j].clone(),
                    r: m.r[i][j],
                    band,
                });
            }
        }
    }
    CorrelationNetwork {
        nodes: m.variables.clone(),
        edges,
    }
}

impl CorrelationNetwork {
    pub fn edge(&self, a: &str, b: &str) -> Option<&CorrEdge> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }
}

/// Minimum |directionality| for a variable to enter the disruption rule.
pub const DIRECTIONALITY_FLOOR: f64 = 0.1;

/// One flagged pair: the attribution-implied joint risk direction
/// contradicts the baseline correlation sign, with both pieces of evidence
/// attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disruption {
    pub a: String,
    pub b: String,
    pub baseline_r: f64,
    pub baseline_band: CorrBand,
    pub directionality_a: f64,
    pub directionality_b: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DisruptionReport {
    pub surgery: String,
    pub outcome: Option<OutcomeKind>,
    pub disruptions: Vec<Disruption>,
}

/// Flags every network edge (A, B) whose endpoints both appear in the
/// impact list with |directionality| >= 0.1 and whose directionality signs
/// multiply to the opposite of the edge sign: risk rising along a joint
/// direction anti-aligned with a positive baseline correlation (or aligned
/// with a negative one).
pub fn disruption_report(
    network: &CorrelationNetwork,
    impacts: &[FeatureImpact],
) -> Vec<Disruption> {
    let dir_of = |name: &str| -> Option<f64> {
        impacts
            .iter()
            .find(|imp| imp.name == name)
            .map(|imp| imp.directionality)
    };
    let mut out = Vec::new();
    for edge in &network.edges {
        let (Some(da), Some(db)) = (dir_of(&edge.a), dir_of(&edge.b)) else {
            continue;
        };
        if da.abs() < DIRECTIONALITY_FLOOR || db.abs() < DIRECTIONALITY_FLOOR {
            continue;
        }
        let edge_sign = if edge.band.positive { 1.0 } else { -1.0 };
        if da.signum() * db.signum() == -edge_sign {
            out.push(Disruption {
                a: edge.a.clone(),
                b: edge.b.clone(),
                baseline_r: edge.r,
                baseline_band: edge.band,
                directionality_a: da,
                directionality_b: db,
            });
        }
    }
    out
}
