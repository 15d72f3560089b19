//! Invariant coordinate selection: joint diagonalization of two scatter
//! matrices and the resulting invariant coordinates.

use std::fmt;
use std::str::FromStr;

use crate::error::{validation, IcsError, Result};
use crate::matrix::{dot, Matrix};
use crate::matstat::{check_data, check_symmetric, inv_sqrt, sym_eigen};
use crate::scalar::Scalar;
use crate::scatter::{EstimatorId, ScatterEstimate};

/// Ordered scatter pair `V₁-V₂`, written `tcov:2,cov` (V₁ first).
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    pub v1: EstimatorId,
    pub v2: EstimatorId,
}

impl ScatterPair {
    pub fn new(v1: EstimatorId, v2: EstimatorId) -> Self {
        Self { v1, v2 }
    }

    /// Estimates both scatters on `x` and runs ICS.
    ///
    /// The two estimators draw from different seeds so that two randomized
    /// estimators never share a search path.
    pub fn fit<T: Scalar>(&self, x: &Matrix<T>, seed: u64) -> Result<IcsResult<T>> {
        let v1 = self.v1.estimate(x, seed)?;
        let v2 = self.v2.estimate(x, seed.wrapping_add(1))?;
        ics(x, &v1, &v2)
    }
}

impl fmt::Display for ScatterPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.v1, self.v2)
    }
}

impl FromStr for ScatterPair {
    type Err = IcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(',') {
            Some((a, b)) => Ok(Self::new(a.parse()?, b.parse()?)),
            None => Err(IcsError::Spec {
                spec: s.to_string(),
                message: "expected two estimators separated by a comma".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcsResult<T> {
    /// Unmixing matrix; row i is the direction of the i-th invariant coordinate.
    pub w: Matrix<T>,
    /// Generalized eigenvalues, descending.
    pub eigenvalues: Vec<T>,
    /// Centering used for the scores.
    pub location: Vec<T>,
    /// `(X − 1Tᵀ)Wᵀ`.
    pub scores: Matrix<T>,
    pub pair: ScatterPair,
    pub v1: Matrix<T>,
    pub v2: Matrix<T>,
}

impl<T: Scalar> IcsResult<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `(wᵀV₂w)/(wᵀV₁w)`; ranges over `[λ_d, λ₁]`.
    pub fn generalized_kurtosis(&self, w: &[T]) -> Result<T> {
        if w.len() != self.dim() {
            return validation(format!("direction has length {}, expected {}", w.len(), self.dim()));
        }
        if w.iter().all(|v| *v == T::zero()) {
            return validation("generalized kurtosis needs a nonzero direction");
        }
        let num = dot(w, &self.v2.matvec(w));
        let den = dot(w, &self.v1.matvec(w));
        Ok(num / den)
    }

    /// Score columns at the given 0-based component indices, in the order given.
    pub fn project(&self, indices: &[usize]) -> Result<Matrix<T>> {
        project_columns(&self.scores, indices)
    }
}

pub(crate) fn project_columns<T: Scalar>(scores: &Matrix<T>, indices: &[usize]) -> Result<Matrix<T>> {
    if indices.is_empty() {
        return validation("component selection is empty");
    }
    let d = scores.cols();
    if let Some(&bad) = indices.iter().find(|&&i| i >= d) {
        return validation(format!("component {} out of range 1..={d}", bad + 1));
    }
    let mut seen = vec![false; d];
    for &i in indices {
        if std::mem::replace(&mut seen[i], true) {
            return validation(format!("component {} selected twice", i + 1));
        }
    }
    Ok(scores.select_columns(indices))
}

/// Flips the sign of each row so that its largest-magnitude entry is positive.
pub(crate) fn fix_row_signs<T: Scalar>(w: &mut Matrix<T>) {
    for i in 0..w.rows() {
        let row = w.row_mut(i);
        let mut best = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < T::zero() {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// Joint diagonalization of `v1` and `v2` on the data `x`.
pub fn ics<T: Scalar>(x: &Matrix<T>, v1: &ScatterEstimate<T>, v2: &ScatterEstimate<T>) -> Result<IcsResult<T>> {
    check_data(x)?;
    let d = x.cols();
    if v1.matrix.shape() != (d, d) || v2.matrix.shape() != (d, d) {
        return validation(format!(
            "scatter dimensions {:?} and {:?} do not match the data dimension {d}",
            v1.matrix.shape(),
            v2.matrix.shape()
        ));
    }
    check_symmetric(&v2.matrix)?;
    let root = inv_sqrt(&v1.matrix)?;
    let m = root.matmul(&v2.matrix)?.matmul(&root)?.symmetrized();
    let eig = sym_eigen(&m)?;
    let mut w = eig.vectors.transpose().matmul(&root)?;
    fix_row_signs(&mut w);
    let location = v1.location.clone();
    let centered = Matrix::from_fn(x.rows(), d, |i, j| x[(i, j)] - location[j]);
    let scores = centered.matmul_t(&w)?;
    Ok(IcsResult {
        w,
        eigenvalues: eig.values,
        location,
        scores,
        pair: ScatterPair::new(v1.estimator.clone(), v2.estimator.clone()),
        v1: v1.matrix.clone(),
        v2: v2.matrix.clone(),
    })
}
