//! Least squares via Householder QR.
//!
//! Rows with identical regressors are collapsed before factorising: the fit on
//! `sqrt(count) * x` against `sqrt(count) * mean(y)` has the same coefficients,
//! and the within-pattern sum of squares is added back for the residual
//! variance. Categorical designs shrink to a handful of rows this way.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Design {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
            return Err(Error::Dimension(format!(
                "design row has {} entries, {} columns named",
                r.len(),
                names.len()
            )));
        }
        Ok(Design { names, rows })
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Residual sum of squares over `n - p`; NaN when `n == p`.
    pub residual_variance: f64,
    pub n_obs: usize,
}

impl RegressionFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

/// One distinct regressor row with the count, sum and sum of squares of the
/// outcomes that share it.
#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    pub x: Vec<f64>,
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

/// Ordinary least squares of `y` on the design.
pub fn ols_fit(design: &Design, y: &[f64]) -> Result<RegressionFit> {
    if design.rows.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} design rows, {} outcomes",
            design.rows.len(),
            y.len()
        )));
    }
    let mut groups: BTreeMap<Vec<u64>, Pattern> = BTreeMap::new();
    for (x, &v) in design.rows.iter().zip(y) {
        let key = x.iter().map(|f| f.to_bits()).collect();
        let p = groups.entry(key).or_insert_with(|| Pattern {
            x: x.clone(),
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
        });
        p.count += 1;
        p.sum += v;
        p.sum_sq += v * v;
    }
    let patterns: Vec<Pattern> = groups.into_values().collect();
    fit_patterns(&design.names, &patterns)
}

pub(crate) fn fit_patterns(names: &[String], patterns: &[Pattern]) -> Result<RegressionFit> {
    let p = names.len();
    let n: usize = patterns.iter().map(|q| q.count).sum();
    if n == 0 {
        return Err(Error::Empty("no observations to regress".into()));
    }
    if let Some(y) = patterns.iter().find(|q| !q.sum.is_finite()) {
        return Err(Error::Numerical(format!("non-finite outcome sum ({})", y.sum)));
    }
    let m = patterns.len();
    if m < p {
        // fewer distinct rows than columns: column m cannot be identified
        return Err(Error::RankDeficient { column: names[m].clone() });
    }
    let mut a = DMatrix::<f64>::zeros(m, p);
    let mut b = DVector::<f64>::zeros(m);
    let mut within = 0.0;
    for (i, q) in patterns.iter().enumerate() {
        let w = (q.count as f64).sqrt();
        for (j, &v) in q.x.iter().enumerate() {
            a[(i, j)] = w * v;
        }
        let mean = q.sum / q.count as f64;
        b[i] = w * mean;
        within += (q.sum_sq - q.sum * mean).max(0.0);
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|k| a.column(k).norm()).fold(0.0, f64::max);
    for k in 0..p {
        if r[(k, k)].abs() <= 1e-10 * scale.max(1.0) {
            return Err(Error::RankDeficient { column: names[k].clone() });
        }
    }
    let qtb = qr.q().transpose() * &b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let between = (&a * &beta - &b).norm_squared();
    let residual_variance = if n > p { (between + within) / (n - p) as f64 } else { f64::NAN };
    Ok(RegressionFit {
        names: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        residual_variance,
        n_obs: n,
    })
}
