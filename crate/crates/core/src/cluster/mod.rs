//! Clustering back-ends applied after dimension reduction.
//!
//! Labels run from 1 to k in order of first appearance; 0 marks trimmed or
//! noise observations.

mod gmm;
mod kmeans;
mod pam;
mod standardize;

use std::fmt;
use std::str::FromStr;

pub use gmm::{gmm_em, GmmOptions};
pub use kmeans::{kmeans, tkmeans, KMeansOptions};
pub use pam::{pam, PAM_MAX_ROWS};
pub use standardize::standardize;

use crate::error::{IcsError, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const NOISE: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterMethod {
    Kmeans,
    Pam,
    Tkmeans { trim: f64 },
    Gmm,
    GmmNoise,
}

impl ClusterMethod {
    pub const DEFAULT_TRIM: f64 = 0.05;

    /// Robust (median/MAD) standardization is used before PAM and trimmed k-means
    /// when clustering unreduced data.
    pub fn wants_robust_standardization(&self) -> bool {
        matches!(self, ClusterMethod::Pam | ClusterMethod::Tkmeans { .. })
    }

    /// Runs the method with default options.
    pub fn run<T: Scalar>(&self, y: &Matrix<T>, k: usize, seed: u64) -> Result<ClusterResult<T>> {
        match *self {
            ClusterMethod::Kmeans => kmeans(y, k, &KMeansOptions::default(), seed),
            ClusterMethod::Pam => pam(y, k),
            ClusterMethod::Tkmeans { trim } => tkmeans(y, k, trim, &KMeansOptions::default(), seed),
            ClusterMethod::Gmm => gmm_em(y, k, false, &GmmOptions::default(), seed),
            ClusterMethod::GmmNoise => gmm_em(y, k, true, &GmmOptions::default(), seed),
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterMethod::Kmeans => write!(f, "kmeans"),
            ClusterMethod::Pam => write!(f, "pam"),
            ClusterMethod::Tkmeans { trim } => write!(f, "tkmeans:{trim}"),
            ClusterMethod::Gmm => write!(f, "gmm"),
            ClusterMethod::GmmNoise => write!(f, "gmm-noise"),
        }
    }
}

impl FromStr for ClusterMethod {
    type Err = IcsError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let err = |m: &str| IcsError::Spec {
            spec: s.to_string(),
            message: m.to_string(),
        };
        match lower.split_once(':') {
            None => match lower.as_str() {
                "kmeans" => Ok(ClusterMethod::Kmeans),
                "pam" => Ok(ClusterMethod::Pam),
                "tkmeans" => Ok(ClusterMethod::Tkmeans {
                    trim: Self::DEFAULT_TRIM,
                }),
                "gmm" => Ok(ClusterMethod::Gmm),
                "gmm-noise" => Ok(ClusterMethod::GmmNoise),
                _ => Err(err("unknown clustering method")),
            },
            Some(("tkmeans", t)) => match t.parse::<f64>() {
                Ok(trim) if (0.0..1.0).contains(&trim) => Ok(ClusterMethod::Tkmeans { trim }),
                _ => Err(err("trimming proportion must lie in [0, 1)")),
            },
            Some(_) => Err(err("unknown clustering method or unexpected parameter")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult<T> {
    pub labels: Vec<usize>,
    /// Row g−1 holds the center of cluster g (mean, medoid or mixture mean).
    pub centers: Matrix<T>,
    pub method: ClusterMethod,
    /// Within-cluster sum of squares, total medoid dissimilarity or log-likelihood.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration of the retained start.
    pub history: Vec<f64>,
    /// Posterior probabilities for mixtures; the noise column comes last.
    pub responsibilities: Option<Matrix<T>>,
    /// Set when a mixture covariance needed a ridge.
    pub regularized: bool,
    pub mixture: Option<MixtureParams<T>>,
}

/// Fitted mixture parameters, ordered like the cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams<T> {
    pub weights: Vec<f64>,
    pub noise_weight: f64,
    /// Maximum-likelihood (divisor n_g) component covariances.
    pub covariances: Vec<Matrix<T>>,
}

/// Renumbers non-noise labels 1..k by first appearance and permutes `centers` to match.
pub(crate) fn canonicalize<T: Scalar>(raw: &[usize], centers: &Matrix<T>) -> (Vec<usize>, Matrix<T>) {
    let (labels, order) = canonical_order(raw, centers.rows());
    (labels, centers.select_rows(&order))
}

/// Canonical labels and, for each new label g, the old component index `order[g−1]`.
pub(crate) fn canonical_order(raw: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut map = vec![usize::MAX; k];
    let mut order = Vec::with_capacity(k);
    for &l in raw {
        if l != NOISE && map[l - 1] == usize::MAX {
            map[l - 1] = order.len() + 1;
            order.push(l - 1);
        }
    }
    for g in 0..k {
        if map[g] == usize::MAX {
            map[g] = order.len() + 1;
            order.push(g);
        }
    }
    let labels = raw.iter().map(|&l| if l == NOISE { NOISE } else { map[l - 1] }).collect();
    (labels, order)
}

pub(crate) fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return crate::error::validation("cluster count must be positive");
    }
    if k > n {
        return crate::error::validation(format!("cannot form {k} clusters from {n} observations"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_grammar() {
        for s in ["kmeans", "pam", "tkmeans:0.05", "gmm", "gmm-noise"] {
            assert_eq!(s.parse::<ClusterMethod>().unwrap().to_string(), s);
        }
        assert_eq!("tkmeans".parse::<ClusterMethod>().unwrap(), ClusterMethod::Tkmeans { trim: 0.05 });
        assert!("tkmeans:1".parse::<ClusterMethod>().is_err());
        assert!("dbscan".parse::<ClusterMethod>().is_err());
    }

    #[test]
    fn canonical_labels_follow_first_appearance() {
        let c: Matrix<f64> = Matrix::from_f64_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let (l, c2) = canonicalize(&[3, 0, 1, 3, 2], &c);
        assert_eq!(l, vec![1, 0, 2, 1, 3]);
        assert_eq!(c2.column(0), vec![2.0, 0.0, 1.0]);
    }
}
