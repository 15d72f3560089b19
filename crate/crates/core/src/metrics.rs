//! Discriminatory power (Wilks' lambda, η²) and partition agreement (ARI).
//!
//! Label 0 marks trimmed, noise or outlier observations; it is treated as a
//! group of its own like any other label.

use std::collections::BTreeMap;

use crate::error::{validation, IcsError, Result};
use crate::matrix::Matrix;
use crate::matstat::{cholesky, forward_substitute, scatter_about, sym_eigen};
use crate::scalar::Scalar;

fn groups(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut g: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        g.entry(l).or_default().push(i);
    }
    g
}

/// `det(E)/det(T)` with E the within-group and T the total SSCP matrix.
pub fn wilks_lambda<T: Scalar>(y: &Matrix<T>, labels: &[usize]) -> Result<T> {
    if labels.len() != y.rows() {
        return validation(format!("{} labels for {} rows", labels.len(), y.rows()));
    }
    if y.cols() == 0 {
        return validation("no columns to evaluate");
    }
    let g = groups(labels);
    if g.len() < 2 {
        return validation("Wilks' lambda needs at least two groups");
    }
    let d = y.cols();
    let total = scatter_about(y, &y.col_means(), T::one());
    let mut within = Matrix::zeros(d, d);
    for rows in g.values() {
        let sub = y.select_rows(rows);
        within = within.add(&scatter_about(&sub, &sub.col_means(), T::one()));
    }
    let l = cholesky(&total).ok_or_else(|| IcsError::Evaluation("total SSCP matrix is singular".into()))?;
    // M = L⁻¹ E L⁻ᵀ, so det(M) = det(E)/det(T)
    let mut z = within.transpose();
    for i in 0..d {
        forward_substitute(&l, z.row_mut(i));
    }
    let mut m = z.transpose();
    for i in 0..d {
        forward_substitute(&l, m.row_mut(i));
    }
    let eig = sym_eigen(&m.symmetrized())?;
    let det = eig.values.iter().fold(T::one(), |acc, &v| acc * v.max(T::zero()));
    Ok(det.min(T::one()))
}

/// `η² = 1 − Λ`.
pub fn eta2<T: Scalar>(y: &Matrix<T>, labels: &[usize]) -> Result<T> {
    Ok(T::one() - wilks_lambda(y, labels)?)
}

fn choose2(n: u64) -> f64 {
    (n as f64) * (n.saturating_sub(1) as f64) / 2.0
}

/// Hubert–Arabie adjusted Rand index.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return validation(format!("label vectors differ in length ({} vs {})", a.len(), b.len()));
    }
    if a.is_empty() {
        return validation("label vectors are empty");
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let pairs = choose2(a.len() as u64);
    if pairs == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / pairs;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
