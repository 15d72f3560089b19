//! Correlation-matrix PCA from a classical or robust scatter estimate.

use std::fmt;
use std::str::FromStr;

use crate::error::{validation, IcsError, Result};
use crate::ics::fix_row_signs;
use crate::matrix::Matrix;
use crate::matstat::{check_data, sym_eigen};
use crate::scalar::Scalar;
use crate::scatter::{correlation_of, EstimatorId, ScatterEstimate};

/// How many leading principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaRule {
    /// Smallest prefix explaining at least this share of the total variance.
    Pct(f64),
    KMinus1,
}

impl fmt::Display for PcaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcaRule::Pct(t) => {
                let p = t * 100.0;
                if (p - p.round()).abs() < 1e-9 {
                    write!(f, "pct{}", p.round())
                } else {
                    write!(f, "pct{p}")
                }
            }
            PcaRule::KMinus1 => write!(f, "kminus1"),
        }
    }
}

impl FromStr for PcaRule {
    type Err = IcsError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "kminus1" {
            return Ok(PcaRule::KMinus1);
        }
        if let Some(pct) = lower.strip_prefix("pct") {
            if let Ok(p) = pct.parse::<f64>() {
                if p > 0.0 && p <= 100.0 {
                    return Ok(PcaRule::Pct(p / 100.0));
                }
            }
        }
        Err(IcsError::Spec {
            spec: s.to_string(),
            message: "expected `pct<percent>` or `kminus1`".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult<T> {
    /// Eigenvectors of the correlation matrix, as columns.
    pub loadings: Matrix<T>,
    /// Descending; they sum to d.
    pub eigenvalues: Vec<T>,
    /// Standardized data times the loadings.
    pub scores: Matrix<T>,
    pub location: Vec<T>,
    pub scale: Vec<T>,
    pub scatter: EstimatorId,
}

impl<T: Scalar> PcaResult<T> {
    pub fn select(&self, rule: PcaRule, k: usize) -> Result<Vec<usize>> {
        match rule {
            PcaRule::Pct(t) => select_pct(&self.eigenvalues, t),
            PcaRule::KMinus1 => select_k_minus_1(self.eigenvalues.len(), k),
        }
    }
}

/// PCA of the correlation matrix derived from `scatter`.
///
/// Scores are computed on the data standardized by the scatter's location
/// and the square roots of its diagonal.
pub fn pca<T: Scalar>(x: &Matrix<T>, scatter: &ScatterEstimate<T>) -> Result<PcaResult<T>> {
    check_data(x)?;
    let d = x.cols();
    if scatter.dim() != d {
        return validation("scatter dimension does not match the data");
    }
    let corr = correlation_of(&scatter.matrix)?;
    let eig = sym_eigen(&corr)?;
    let smallest = *eig.values.last().expect("non-empty spectrum");
    let cutoff = T::from_usize_lossy(d) * T::epsilon() * eig.values[0];
    if !(smallest > cutoff) {
        return Err(IcsError::Singular {
            eigenvalue: smallest.as_f64(),
            cutoff: cutoff.as_f64(),
            context: "correlation matrix".into(),
        });
    }
    let mut vt = eig.vectors.transpose();
    fix_row_signs(&mut vt);
    let loadings = vt.transpose();
    let scale: Vec<T> = scatter.matrix.diag().iter().map(|v| v.sqrt()).collect();
    let location = scatter.location.clone();
    let z = Matrix::from_fn(x.rows(), d, |i, j| (x[(i, j)] - location[j]) / scale[j]);
    let scores = z.matmul(&loadings)?;
    Ok(PcaResult {
        loadings,
        eigenvalues: eig.values,
        scores,
        location,
        scale,
        scatter: scatter.estimator.clone(),
    })
}

/// Smallest m with `(λ₁ + … + λ_m)/d ≥ threshold`; returns `0..m`.
pub fn select_pct<T: Scalar>(eigenvalues: &[T], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return validation(format!("variance threshold must lie in (0, 1], got {threshold}"));
    }
    let d = eigenvalues.len() as f64;
    let mut acc = 0.0;
    for (i, v) in eigenvalues.iter().enumerate() {
        acc += v.as_f64();
        if acc / d >= threshold - 1e-12 {
            return Ok((0..=i).collect());
        }
    }
    Ok((0..eigenvalues.len()).collect())
}

/// `0..k−1`.
pub fn select_k_minus_1(d: usize, k: usize) -> Result<Vec<usize>> {
    if k < 2 || k - 1 > d {
        return validation(format!("k − 1 must lie in 1..={d}, got k = {k}"));
    }
    Ok((0..k - 1).collect())
}
