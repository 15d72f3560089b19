//! Scatter and shape estimators.
//!
//! Every estimator returns a [`ScatterEstimate`]: a symmetric matrix plus the
//! location that goes along with it. Estimators are selected from text with
//! the grammar understood by [`EstimatorId`]'s `FromStr` impl:
//! `cov`, `cov4`, `mlc`, `mcd:0.25`, `rmcd:0.75`, `scov:2`, `tcov:2`,
//! `ucov:0.2`, `lcov:cov:0.1`.

mod mcd;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use mcd::{mcd, mcd_consistency_factor, mcd_exhaustive, rmcd, rmcd_from_raw, McdOptions};

use crate::error::{validation, IcsError, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::matstat::{
    check_data, check_symmetric, cholesky, inv_sqrt, log_det_spd, mahalanobis_rows_chol,
    scatter_about, sqrt_sym, sym_eigen, sym_inverse,
};
use crate::scalar::Scalar;

/// Which estimator produced a scatter matrix, with its tuning constants.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorId {
    Cov,
    Cov4,
    Mlc,
    Mcd { alpha: f64 },
    Rmcd { alpha: f64 },
    Scov { beta: f64 },
    Tcov { beta: f64 },
    Ucov { beta: f64 },
    Lcov { base: Box<EstimatorId>, beta: f64 },
}

impl EstimatorId {
    pub const DEFAULT_TCOV_BETA: f64 = 2.0;
    pub const DEFAULT_UCOV_BETA: f64 = 0.2;
    pub const DEFAULT_LCOV_BETA: f64 = 0.1;

    /// Shape matrices carry no meaningful scale.
    pub fn is_shape_only(&self) -> bool {
        matches!(self, EstimatorId::Lcov { .. })
    }

    /// Computes the estimator on `x` with default algorithm settings.
    ///
    /// `seed` only matters for the randomized MCD search.
    pub fn estimate<T: Scalar>(&self, x: &Matrix<T>, seed: u64) -> Result<ScatterEstimate<T>> {
        match self {
            EstimatorId::Cov => cov(x),
            EstimatorId::Cov4 => cov4(x),
            EstimatorId::Mlc => mlc(x, MLC_MAX_ITER, T::lit(MLC_TOL)),
            EstimatorId::Mcd { alpha } => mcd(x, T::lit(*alpha), &McdOptions::default(), seed),
            EstimatorId::Rmcd { alpha } => rmcd(x, T::lit(*alpha), &McdOptions::default(), seed),
            EstimatorId::Scov { beta } => scov(x, T::lit(*beta)),
            EstimatorId::Tcov { beta } => tcov(x, T::lit(*beta)),
            EstimatorId::Ucov { beta } => ucov(x, T::lit(*beta)),
            EstimatorId::Lcov { base, beta } => {
                let v0 = base.estimate(x, seed)?;
                lcov(x, &v0, T::lit(*beta))
            }
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorId::Cov => write!(f, "cov"),
            EstimatorId::Cov4 => write!(f, "cov4"),
            EstimatorId::Mlc => write!(f, "mlc"),
            EstimatorId::Mcd { alpha } => write!(f, "mcd:{alpha}"),
            EstimatorId::Rmcd { alpha } => write!(f, "rmcd:{alpha}"),
            EstimatorId::Scov { beta } => write!(f, "scov:{beta}"),
            EstimatorId::Tcov { beta } => write!(f, "tcov:{beta}"),
            EstimatorId::Ucov { beta } => write!(f, "ucov:{beta}"),
            EstimatorId::Lcov { base, beta } => write!(f, "lcov:{base}:{beta}"),
        }
    }
}

fn spec_err<T>(spec: &str, message: impl Into<String>) -> Result<T> {
    Err(IcsError::Spec {
        spec: spec.to_string(),
        message: message.into(),
    })
}

fn parse_param(spec: &str, token: &str) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => spec_err(spec, format!("`{token}` is not a number")),
    }
}

impl FromStr for EstimatorId {
    type Err = IcsError;

    fn from_str(s: &str) -> Result<Self> {
        let spec = s.trim();
        let lower = spec.to_ascii_lowercase();
        let mut parts = lower.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();

        // compact tags such as `rmcd0.75`
        for (prefix, robust) in [("rmcd", true), ("mcd", false)] {
            if let Some(num) = head.strip_prefix(prefix) {
                if !num.is_empty() && rest.is_empty() {
                    let alpha = parse_param(spec, num)?;
                    return make_mcd(spec, alpha, robust);
                }
            }
        }

        let one_param = |default: Option<f64>| -> Result<f64> {
            match (rest.as_slice(), default) {
                ([], Some(d)) => Ok(d),
                ([], None) => spec_err(spec, "missing parameter"),
                ([p], _) => parse_param(spec, p),
                _ => spec_err(spec, "too many parameters"),
            }
        };
        let positive = |v: f64| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                spec_err(spec, "parameter must be positive")
            }
        };

        match head {
            "cov" | "cov4" | "mlc" if !rest.is_empty() => spec_err(spec, "takes no parameter"),
            "cov" => Ok(EstimatorId::Cov),
            "cov4" => Ok(EstimatorId::Cov4),
            "mlc" => Ok(EstimatorId::Mlc),
            "mcd" => make_mcd(spec, one_param(None)?, false),
            "rmcd" => make_mcd(spec, one_param(None)?, true),
            "scov" => Ok(EstimatorId::Scov {
                beta: positive(one_param(None)?)?,
            }),
            "tcov" => Ok(EstimatorId::Tcov {
                beta: positive(one_param(Some(Self::DEFAULT_TCOV_BETA))?)?,
            }),
            "ucov" => Ok(EstimatorId::Ucov {
                beta: positive(one_param(Some(Self::DEFAULT_UCOV_BETA))?)?,
            }),
            "lcov" => {
                let (base, beta) = parse_lcov_params(spec, &rest)?;
                Ok(EstimatorId::Lcov {
                    base: Box::new(base),
                    beta,
                })
            }
            _ => spec_err(spec, "unknown estimator"),
        }
    }
}

/// `lcov[:<base spec>][:<fraction>]`; the base defaults to `cov`, the fraction to 0.1.
fn parse_lcov_params(spec: &str, rest: &[&str]) -> Result<(EstimatorId, f64)> {
    let in_range = |b: f64| b > 0.0 && b <= 1.0;
    let (base, beta) = match rest {
        [] => (EstimatorId::Cov, EstimatorId::DEFAULT_LCOV_BETA),
        [one] => match one.parse::<f64>() {
            Ok(b) => (EstimatorId::Cov, b),
            Err(_) => (one.parse()?, EstimatorId::DEFAULT_LCOV_BETA),
        },
        [prefix @ .., last] => {
            let split = last
                .parse::<f64>()
                .ok()
                .filter(|&b| in_range(b))
                .and_then(|b| prefix.join(":").parse::<EstimatorId>().ok().map(|e| (e, b)));
            match split {
                Some(pair) => pair,
                None => (rest.join(":").parse()?, EstimatorId::DEFAULT_LCOV_BETA),
            }
        }
    };
    if !in_range(beta) {
        return spec_err(spec, "lcov neighbourhood fraction must lie in (0, 1]");
    }
    Ok((base, beta))
}

fn make_mcd(spec: &str, alpha: f64, robust: bool) -> Result<EstimatorId> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return spec_err(spec, "subset fraction must lie in (0, 1]");
    }
    Ok(if robust {
        EstimatorId::Rmcd { alpha }
    } else {
        EstimatorId::Mcd { alpha }
    })
}

/// Fit diagnostics attached to a scatter estimate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScatterDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Rows of the winning MCD subset, ascending.
    pub subset: Option<Vec<usize>>,
    /// Log-determinants along the winning MCD start's final C-steps.
    pub cstep_log_dets: Vec<f64>,
    /// Rows with weight one after MCD reweighting.
    pub retained: Option<Vec<usize>>,
    /// Set when the matrix is not positive definite (e.g. constant data).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEstimate<T> {
    pub location: Vec<T>,
    pub matrix: Matrix<T>,
    pub estimator: EstimatorId,
    /// When true only the proportionality class of `matrix` is meaningful.
    pub shape_only: bool,
    pub diagnostics: ScatterDiagnostics,
}

impl<T: Scalar> ScatterEstimate<T> {
    pub fn new(location: Vec<T>, matrix: Matrix<T>, estimator: EstimatorId) -> Self {
        let shape_only = estimator.is_shape_only();
        Self {
            location,
            matrix,
            estimator,
            shape_only,
            diagnostics: ScatterDiagnostics {
                converged: true,
                ..Default::default()
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }
}

pub(crate) const MLC_MAX_ITER: usize = 200;
pub(crate) const MLC_TOL: f64 = 1e-7;

fn cov_matrix<T: Scalar>(x: &Matrix<T>, mean: &[T]) -> Matrix<T> {
    scatter_about(x, mean, T::from_usize_lossy(x.rows() - 1))
}

/// Fails fast on zero-variance columns, then on any other singularity.
fn require_nonsingular<T: Scalar>(c: &Matrix<T>) -> Result<Matrix<T>> {
    if let Some(column) = c.diag().iter().position(|&v| !(v > T::zero())) {
        return Err(IcsError::DegenerateColumn { column });
    }
    inv_sqrt(c)
}

/// Centered rows whitened by the sample covariance, with the covariance itself.
fn cov_whitened<T: Scalar>(x: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>, Matrix<T>)> {
    let mean = x.col_means();
    let c = cov_matrix(x, &mean);
    let w = require_nonsingular(&c)?;
    let centered = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - mean[j]);
    Ok((mean, c, centered.matmul(&w)?))
}

fn row_norms_sq<T: Scalar>(z: &Matrix<T>) -> Vec<T> {
    z.row_iter().map(|r| r.iter().map(|&v| v * v).sum()).collect()
}

/// Sample covariance with the `n − 1` denominator.
pub fn cov<T: Scalar>(x: &Matrix<T>) -> Result<ScatterEstimate<T>> {
    check_data(x)?;
    let mean = x.col_means();
    let c = cov_matrix(x, &mean);
    let degenerate = cholesky(&c).is_none();
    let mut est = ScatterEstimate::new(mean, c, EstimatorId::Cov);
    est.diagnostics.degenerate = degenerate;
    Ok(est)
}

/// Fourth-moment scatter `1/(n(d+2)) Σ r²ᵢ (xᵢ − x̄)(xᵢ − x̄)ᵀ`.
pub fn cov4<T: Scalar>(x: &Matrix<T>) -> Result<ScatterEstimate<T>> {
    check_data(x)?;
    let (n, d) = x.shape();
    let (mean, _, z) = cov_whitened(x)?;
    let r2 = row_norms_sq(&z);
    let mut s = Matrix::zeros(d, d);
    let mut buf = vec![T::zero(); d];
    for (i, r) in x.row_iter().enumerate() {
        for j in 0..d {
            buf[j] = r[j] - mean[j];
        }
        s.rank_one_update_upper(&buf, r2[i]);
    }
    s.mirror_upper();
    let denom = T::from_usize_lossy(n) * T::from_usize_lossy(d + 2);
    Ok(ScatterEstimate::new(mean, s.scaled(T::one() / denom), EstimatorId::Cov4))
}

fn coordinatewise_median<T: Scalar>(x: &Matrix<T>) -> Vec<T> {
    (0..x.cols()).map(|j| median(&x.column(j))).collect()
}

pub(crate) fn median<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5)
    }
}

/// M-estimator of location and scatter derived from the multivariate Cauchy likelihood.
///
/// Iterates the reweighting `wᵢ = (d+1)/(r²ᵢ+1)` from the coordinatewise
/// median and the sample covariance until the relative changes of the
/// location (in the current scatter metric) and of the scatter (Frobenius)
/// both fall below `tol`.
pub fn mlc<T: Scalar>(x: &Matrix<T>, max_iter: usize, tol: T) -> Result<ScatterEstimate<T>> {
    check_data(x)?;
    let (n, d) = x.shape();
    if n <= d + 1 {
        return validation(format!("mlc needs n > d + 1, got n = {n}, d = {d}"));
    }
    let mut loc = coordinatewise_median(x);
    let mean = x.col_means();
    let mut v = cov_matrix(x, &mean);
    require_nonsingular(&v)?;
    let dp1 = T::from_usize_lossy(d + 1);
    let nn = T::from_usize_lossy(n);
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let l = cholesky(&v).ok_or_else(|| IcsError::Singular {
            eigenvalue: 0.0,
            cutoff: 0.0,
            context: format!("mlc iteration {it}"),
        })?;
        let r2 = mahalanobis_rows_chol(x, &loc, &l);
        let w: Vec<T> = r2.iter().map(|&r| dp1 / (r + T::one())).collect();
        let sw: T = w.iter().copied().sum();
        let mut new_loc = vec![T::zero(); d];
        for (r, &wi) in x.row_iter().zip(&w) {
            for j in 0..d {
                new_loc[j] += wi * r[j];
            }
        }
        new_loc.iter_mut().for_each(|v| *v /= sw);
        let mut new_v = Matrix::zeros(d, d);
        let mut buf = vec![T::zero(); d];
        for (r, &wi) in x.row_iter().zip(&w) {
            for j in 0..d {
                buf[j] = r[j] - new_loc[j];
            }
            new_v.rank_one_update_upper(&buf, wi);
        }
        new_v.mirror_upper();
        let new_v = new_v.scaled(T::one() / nn);

        let mut dloc: Vec<T> = new_loc.iter().zip(&loc).map(|(&a, &b)| a - b).collect();
        crate::matstat::forward_substitute(&l, &mut dloc);
        let loc_change = dloc.iter().map(|&v| v * v).sum::<T>().sqrt();
        let scatter_change = new_v.sub(&v).frobenius_norm() / v.frobenius_norm();
        last_change = loc_change.max(scatter_change).as_f64();
        loc = new_loc;
        v = new_v;
        if loc_change < tol && scatter_change < tol {
            let mut est = ScatterEstimate::new(loc, v, EstimatorId::Mlc);
            est.diagnostics.iterations = it;
            return Ok(est);
        }
    }
    Err(IcsError::NotConverged {
        estimator: "mlc".into(),
        iterations: max_iter,
        last_change,
        last_location: loc.iter().map(|v| v.as_f64()).collect(),
        last_scatter: v.as_slice().iter().map(|v| v.as_f64()).collect(),
    })
}

/// Exponential weights `exp(−βr²/2)` rescaled so the largest equals one.
fn exp_weights<T: Scalar>(r2: &[T], beta: T) -> Vec<T> {
    let min = r2.iter().copied().fold(T::infinity(), T::min);
    let half = T::lit(0.5);
    r2.iter().map(|&r| (-(beta * (r - min)) * half).exp()).collect()
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta > T::zero() && beta.is_finite() {
        Ok(())
    } else {
        validation(format!("tuning constant must be positive, got {beta}"))
    }
}

/// One-step M-estimator with weights `exp(−β r²/2)` around the sample mean.
pub fn scov<T: Scalar>(x: &Matrix<T>, beta: T) -> Result<ScatterEstimate<T>> {
    check_data(x)?;
    check_beta(beta)?;
    let d = x.cols();
    let (mean, _, z) = cov_whitened(x)?;
    let w = exp_weights(&row_norms_sq(&z), beta);
    let sw: T = w.iter().copied().sum();
    if !(sw > T::zero() && sw.is_finite()) {
        return Err(IcsError::Numeric("scov weight sum is not positive".into()));
    }
    let mut s = Matrix::zeros(d, d);
    let mut buf = vec![T::zero(); d];
    for (r, &wi) in x.row_iter().zip(&w) {
        for j in 0..d {
            buf[j] = r[j] - mean[j];
        }
        s.rank_one_update_upper(&buf, wi);
    }
    s.mirror_upper();
    Ok(ScatterEstimate::new(
        mean,
        s.scaled(T::one() / sw),
        EstimatorId::Scov { beta: beta.as_f64() },
    ))
}

const PAIR_BLOCK: usize = 32;

/// Pairwise-difference scatter with weights `exp(−β r²(xᵢ, xⱼ)/2)`.
///
/// The location field holds the column means; the estimator itself needs none.
pub fn tcov<T: Scalar>(x: &Matrix<T>, beta: T) -> Result<ScatterEstimate<T>> {
    check_data(x)?;
    check_beta(beta)?;
    let (n, d) = x.shape();
    let id = EstimatorId::Tcov { beta: beta.as_f64() };
    if n == 2 {
        // a single pair: its weight cancels in the normalization
        let diff: Vec<T> = x.row(0).iter().zip(x.row(1)).map(|(&a, &b)| a - b).collect();
        let mut s = Matrix::zeros(d, d);
        s.rank_one_update_upper(&diff, T::one());
        s.mirror_upper();
        return Ok(ScatterEstimate::new(x.col_means(), s, id));
    }
    let (mean, c, z) = cov_whitened(x)?;

    let min_r2 = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| sq_dist(z.row(i), z.row(j)))
                .fold(T::infinity(), T::min)
        })
        .reduce(|| T::infinity(), T::min);
    let half_beta = beta * T::lit(0.5);

    let starts: Vec<usize> = (0..n).step_by(PAIR_BLOCK).collect();
    let partials: Vec<(Matrix<T>, T)> = starts
        .par_iter()
        .map(|&start| {
            let mut acc = Matrix::zeros(d, d);
            let mut sw = T::zero();
            let mut diff = vec![T::zero(); d];
            for i in start..(start + PAIR_BLOCK).min(n) {
                let zi = z.row(i);
                for j in (i + 1)..n {
                    let zj = z.row(j);
                    let mut r2 = T::zero();
                    for k in 0..d {
                        diff[k] = zi[k] - zj[k];
                        r2 += diff[k] * diff[k];
                    }
                    let w = (-(r2 - min_r2) * half_beta).exp();
                    sw += w;
                    acc.rank_one_update_upper(&diff, w);
                }
            }
            (acc, sw)
        })
        .collect();
    // sequential reduction keeps results independent of the thread count
    let mut acc = Matrix::zeros(d, d);
    let mut sw = T::zero();
    for (m, w) in partials {
        acc = acc.add(&m);
        sw += w;
    }
    if !(sw > T::zero() && sw.is_finite()) {
        return Err(IcsError::Numeric("tcov weight sum is not positive".into()));
    }
    acc.mirror_upper();
    let whitened = acc.scaled(T::one() / sw);
    let root = sqrt_sym(&c)?;
    let s = root.matmul(&whitened)?.matmul(&root)?.symmetrized();
    Ok(ScatterEstimate::new(mean, s, id))
}

/// `(SCOV_β⁻¹ − β COV⁻¹)⁻¹`.
pub fn ucov<T: Scalar>(x: &Matrix<T>, beta: T) -> Result<ScatterEstimate<T>> {
    check_data(x)?;
    check_beta(beta)?;
    let mean = x.col_means();
    let c = cov_matrix(x, &mean);
    require_nonsingular(&c)?;
    let s = scov(x, beta)?;
    let inner = sym_inverse(&s.matrix)?
        .sub(&sym_inverse(&c)?.scaled(beta))
        .symmetrized();
    let eig = sym_eigen(&inner)?;
    let smallest = *eig.values.last().expect("non-empty spectrum");
    let cutoff = T::from_usize_lossy(x.cols()) * T::epsilon() * eig.values[0].abs();
    if !(smallest > cutoff) {
        return Err(IcsError::NotPositiveDefinite {
            smallest: smallest.as_f64(),
            context: "ucov: SCOV⁻¹ − β·COV⁻¹".into(),
        });
    }
    let m = sym_inverse(&inner)?.symmetrized();
    Ok(ScatterEstimate::new(mean, m, EstimatorId::Ucov { beta: beta.as_f64() }))
}

/// Local shape matrix: the average of determinant-one scatters of each
/// observation's `⌈βn⌉` nearest neighbours in the `V₀` metric, taken about
/// the observation.
///
/// A neighbourhood contains the observation itself; ties at the boundary go
/// to the lower row index.
pub fn lcov<T: Scalar>(x: &Matrix<T>, v0: &ScatterEstimate<T>, beta: T) -> Result<ScatterEstimate<T>> {
    check_data(x)?;
    let (n, d) = x.shape();
    if v0.dim() != d {
        return validation("lcov: base scatter dimension does not match the data");
    }
    if !(beta > T::zero() && beta <= T::one()) {
        return validation(format!("lcov: neighbourhood fraction must lie in (0, 1], got {beta}"));
    }
    let n_beta = (beta * T::from_usize_lossy(n))
        .ceil()
        .to_usize()
        .unwrap_or(n)
        .min(n);
    if n_beta < d + 1 {
        return validation(format!(
            "lcov: neighbourhood size {n_beta} must be at least d + 1 = {}",
            d + 1
        ));
    }
    check_symmetric(&v0.matrix)?;
    let w = inv_sqrt(&v0.matrix)?;
    let z = x.matmul(&w)?;
    let dt = T::from_usize_lossy(d);

    let locals: Vec<Result<Matrix<T>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = z.row(i);
            let mut dist: Vec<(T, usize)> = (0..n).map(|j| (sq_dist(zi, z.row(j)), j)).collect();
            let by_dist = |a: &(T, usize), b: &(T, usize)| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.1.cmp(&b.1))
            };
            if n_beta < n {
                dist.select_nth_unstable_by(n_beta - 1, by_dist);
            }
            let idx: Vec<usize> = dist[..n_beta].iter().map(|&(_, j)| j).collect();
            let sub = x.select_rows(&idx);
            let local = scatter_about(&sub, x.row(i), T::from_usize_lossy(n_beta - 1));
            let log_det =
                log_det_spd(&local).ok_or(IcsError::DegenerateNeighborhood { observation: i })?;
            Ok(local.scaled((-log_det / dt).exp()))
        })
        .collect();
    let mut acc = Matrix::zeros(d, d);
    for local in locals {
        acc = acc.add(&local?);
    }
    let shape = acc.scaled(T::one() / T::from_usize_lossy(n)).symmetrized();
    Ok(ScatterEstimate::new(
        x.col_means(),
        shape,
        EstimatorId::Lcov {
            base: Box::new(v0.estimator.clone()),
            beta: beta.as_f64(),
        },
    ))
}

/// Correlation matrix `Sᵢⱼ / √(SᵢᵢSⱼⱼ)` of a scatter estimate.
pub fn to_correlation<T: Scalar>(s: &ScatterEstimate<T>) -> Result<Matrix<T>> {
    correlation_of(&s.matrix)
}

pub(crate) fn correlation_of<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    check_symmetric(m)?;
    let diag = m.diag();
    if let Some(column) = diag.iter().position(|&v| !(v > T::zero())) {
        return validation(format!("zero diagonal entry in column {column}"));
    }
    let sd: Vec<T> = diag.iter().map(|v| v.sqrt()).collect();
    Ok(Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        if i == j {
            T::one()
        } else {
            m[(i, j)] / (sd[i] * sd[j])
        }
    }))
}
