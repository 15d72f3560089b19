//! Matrix statistics: symmetric eigendecomposition, inverse square roots,
//! Mahalanobis distances and determinants.
//!
//! Every routine here treats its inputs as immutable and is safe to call
//! from many threads at once.

use crate::error::{validation, IcsError, Result};
use crate::matrix::{dot, Matrix};
use crate::scalar::Scalar;

/// Eigendecomposition of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix<T>,
}

fn symmetry_tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Checks that a data matrix has at least two rows, one column and only finite entries.
pub fn check_data<T: Scalar>(x: &Matrix<T>) -> Result<()> {
    if x.rows() < 2 {
        return validation(format!("data needs at least 2 rows, got {}", x.rows()));
    }
    if x.cols() < 1 {
        return validation("data needs at least 1 column");
    }
    if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return validation(format!(
            "non-finite entry at row {}, column {}",
            pos / x.cols(),
            pos % x.cols()
        ));
    }
    Ok(())
}

/// Relative Frobenius symmetry check.
pub fn check_symmetric<T: Scalar>(s: &Matrix<T>) -> Result<()> {
    if s.rows() != s.cols() {
        return validation(format!("expected a square matrix, got {}x{}", s.rows(), s.cols()));
    }
    let asym = s.sub(&s.transpose()).frobenius_norm();
    let scale = s.frobenius_norm().max(T::min_positive_value());
    if asym > symmetry_tolerance::<T>() * scale {
        return validation(format!(
            "matrix is not symmetric (relative asymmetry {:e})",
            (asym / scale).as_f64()
        ));
    }
    Ok(())
}

/// Cyclic Jacobi eigenvalue algorithm for symmetric matrices.
pub fn sym_eigen<T: Scalar>(s: &Matrix<T>) -> Result<SymEigen<T>> {
    check_symmetric(s)?;
    let n = s.rows();
    let mut a = s.symmetrized();
    let mut v = Matrix::<T>::identity(n);
    let norm = a.frobenius_norm();
    if norm == T::zero() {
        return Ok(SymEigen {
            values: vec![T::zero(); n],
            vectors: v,
        });
    }
    let target = T::epsilon() * norm;
    const MAX_SWEEPS: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (apq + apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(IcsError::Numeric(
            "Jacobi eigenvalue iteration did not converge".into(),
        ));
    }
    let raw: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep the solver's order
    order.sort_by(|&i, &j| raw[j].partial_cmp(&raw[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

fn singularity_cutoff<T: Scalar>(d: usize, largest: T) -> T {
    T::from_usize_lossy(d) * T::epsilon() * largest
}

/// Fails with [`IcsError::Singular`] when the spectrum is not safely positive.
fn check_definite<T: Scalar>(eig: &SymEigen<T>, context: &str) -> Result<()> {
    let d = eig.values.len();
    let largest = eig.values[0];
    let smallest = eig.values[d - 1];
    let cutoff = singularity_cutoff(d, largest.max(T::zero()));
    if largest <= T::zero() || smallest <= cutoff {
        return Err(IcsError::Singular {
            eigenvalue: smallest.as_f64(),
            cutoff: cutoff.as_f64(),
            context: context.to_string(),
        });
    }
    Ok(())
}

/// Rebuilds `U · diag(f(λ)) · Uᵀ`.
fn spectral_map<T: Scalar>(eig: &SymEigen<T>, f: impl Fn(T) -> T) -> Matrix<T> {
    let n = eig.values.len();
    let fv: Vec<T> = eig.values.iter().map(|&l| f(l)).collect();
    let u = &eig.vectors;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = T::zero();
            for k in 0..n {
                acc += u[(i, k)] * fv[k] * u[(j, k)];
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc;
        }
    }
    out
}

/// Symmetric inverse square root `S^{-1/2}`.
pub fn inv_sqrt<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>> {
    let eig = sym_eigen(s)?;
    check_definite(&eig, "inverse square root")?;
    Ok(spectral_map(&eig, |l| T::one() / l.sqrt()))
}

/// Symmetric square root `S^{1/2}` of a positive semidefinite matrix.
pub fn sqrt_sym<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>> {
    let eig = sym_eigen(s)?;
    Ok(spectral_map(&eig, |l| l.max(T::zero()).sqrt()))
}

/// Inverse of a symmetric positive definite matrix.
pub fn sym_inverse<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>> {
    let eig = sym_eigen(s)?;
    check_definite(&eig, "inverse")?;
    Ok(spectral_map(&eig, |l| T::one() / l))
}

/// Lower-triangular Cholesky factor; `None` when the matrix is not numerically positive definite.
pub fn cholesky<T: Scalar>(s: &Matrix<T>) -> Option<Matrix<T>> {
    let n = s.rows();
    let mut l = Matrix::<T>::zeros(n, n);
    let scale = (0..n).map(|i| s[(i, i)].abs()).fold(T::zero(), T::max);
    let floor = singularity_cutoff(n, scale);
    for j in 0..n {
        let mut diag = s[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > floor) {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Some(l)
}

/// Natural log of the determinant of an SPD matrix, `None` when not positive definite.
pub fn log_det_spd<T: Scalar>(s: &Matrix<T>) -> Option<T> {
    let l = cholesky(s)?;
    Some((0..s.rows()).map(|i| l[(i, i)].ln()).sum::<T>() * T::lit(2.0))
}

/// Determinant of a symmetric matrix via its spectrum (zero or negative allowed).
pub fn det_sym<T: Scalar>(s: &Matrix<T>) -> Result<T> {
    Ok(sym_eigen(s)?.values.into_iter().fold(T::one(), |a, b| a * b))
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub(crate) fn forward_substitute<T: Scalar>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let mut acc = b[i];
        let row = l.row(i);
        for k in 0..i {
            acc -= row[k] * b[k];
        }
        b[i] = acc / row[i];
    }
}

/// Squared Mahalanobis distances of all rows to `center` given a Cholesky factor of the scatter.
pub(crate) fn mahalanobis_rows_chol<T: Scalar>(x: &Matrix<T>, center: &[T], l: &Matrix<T>) -> Vec<T> {
    let d = x.cols();
    let mut buf = vec![T::zero(); d];
    x.row_iter()
        .map(|r| {
            for j in 0..d {
                buf[j] = r[j] - center[j];
            }
            forward_substitute(l, &mut buf);
            dot(&buf, &buf)
        })
        .collect()
}

/// `(x − center)ᵀ S⁻¹ (x − center)`.
pub fn mahalanobis_sq<T: Scalar>(x: &[T], center: &[T], s: &Matrix<T>) -> Result<T> {
    if x.len() != s.rows() || center.len() != s.rows() {
        return validation("dimension mismatch in Mahalanobis distance");
    }
    let w = inv_sqrt(s)?;
    let diff: Vec<T> = x.iter().zip(center).map(|(&a, &b)| a - b).collect();
    let z = w.matvec(&diff);
    Ok(dot(&z, &z))
}

/// Rows of `(X − 1·centerᵀ) · S^{-1/2}`: squared norms of these rows are Mahalanobis distances.
pub fn whiten<T: Scalar>(x: &Matrix<T>, center: &[T], s: &Matrix<T>) -> Result<Matrix<T>> {
    if x.cols() != s.rows() || center.len() != s.rows() {
        return validation("dimension mismatch in whitening");
    }
    let w = inv_sqrt(s)?;
    let centered = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - center[j]);
    centered.matmul(&w)
}

/// Matrix of squared Mahalanobis distances between all pairs of rows.
pub fn pairwise_mahalanobis_sq<T: Scalar>(x: &Matrix<T>, s: &Matrix<T>) -> Result<Matrix<T>> {
    let zero = vec![T::zero(); x.cols()];
    let z = whiten(x, &zero, s)?;
    let n = x.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = crate::matrix::sq_dist(z.row(i), z.row(j));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Central second-moment matrix `(1/denom) Σ (xᵢ − m)(xᵢ − m)ᵀ`.
pub(crate) fn scatter_about<T: Scalar>(x: &Matrix<T>, center: &[T], denom: T) -> Matrix<T> {
    let d = x.cols();
    let mut s = Matrix::zeros(d, d);
    let mut buf = vec![T::zero(); d];
    for r in x.row_iter() {
        for j in 0..d {
            buf[j] = r[j] - center[j];
        }
        s.rank_one_update_upper(&buf, T::one());
    }
    s.mirror_upper();
    s.scaled(T::one() / denom)
}
