use rayon::prelude::*;

use super::kmeans::single_start;
use super::{canonical_order, check_k, ClusterMethod, ClusterResult, MixtureParams, NOISE};
use crate::error::{validation, IcsError, Result};
use crate::matrix::Matrix;
use crate::matstat::{check_data, cholesky, mahalanobis_rows_chol, sym_eigen};
use crate::rng;
use crate::scalar::Scalar;

const COLLAPSE_RATIO: f64 = 1e-8;
const RIDGE_RATIO: f64 = 1e-6;
const MAX_COLLAPSES: usize = 5;
const INITIAL_NOISE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmOptions {
    pub n_starts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            n_starts: 10,
            max_iter: 1000,
            tol: 1e-8,
        }
    }
}

struct Params<T> {
    weights: Vec<f64>,
    noise_weight: f64,
    means: Matrix<T>,
    covs: Vec<Matrix<T>>,
}

struct Fit<T> {
    params: Params<T>,
    resp: Matrix<T>,
    loglik: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
    regularized: bool,
}

/// Ridges a component covariance whose smallest eigenvalue falls below
/// `COLLAPSE_RATIO·tr/m`; returns whether a ridge was added.
fn guard_covariance<T: Scalar>(cov: &mut Matrix<T>) -> Result<bool> {
    let m = cov.rows();
    let scale = cov.trace().as_f64() / m as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(IcsError::DegenerateFit("mixture component has zero spread".into()));
    }
    let smallest = sym_eigen(cov)?.values[m - 1].as_f64();
    if smallest >= COLLAPSE_RATIO * scale {
        return Ok(false);
    }
    let ridge = T::lit(RIDGE_RATIO * scale);
    for i in 0..m {
        cov[(i, i)] += ridge;
    }
    Ok(true)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior probabilities and log-likelihood under `p`.
fn e_step<T: Scalar>(y: &Matrix<T>, p: &Params<T>, log_noise_density: Option<f64>) -> Result<(Matrix<T>, f64)> {
    let (n, m) = y.shape();
    let k = p.weights.len();
    let cols = k + usize::from(log_noise_density.is_some());
    let mut logp = vec![vec![0.0; cols]; n];
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    for g in 0..k {
        let l = cholesky(&p.covs[g])
            .ok_or_else(|| IcsError::DegenerateFit(format!("covariance of component {} is not positive definite", g + 1)))?;
        let log_det: f64 = (0..m).map(|i| 2.0 * l[(i, i)].as_f64().ln()).sum();
        let maha = mahalanobis_rows_chol(y, p.means.row(g), &l);
        let c = p.weights[g].ln() - 0.5 * (m as f64 * log_2pi + log_det);
        for (row, d2) in logp.iter_mut().zip(maha) {
            row[g] = c - 0.5 * d2.as_f64();
        }
    }
    if let Some(lv) = log_noise_density {
        let c = p.noise_weight.ln() + lv;
        for row in logp.iter_mut() {
            row[k] = c;
        }
    }
    let mut resp = Matrix::zeros(n, cols);
    let mut loglik = 0.0;
    for (i, row) in logp.iter().enumerate() {
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            return Err(IcsError::DegenerateFit(format!("observation {i} has zero likelihood")));
        }
        loglik += lse;
        for (r, &v) in resp.row_mut(i).iter_mut().zip(row) {
            *r = T::lit((v - lse).exp());
        }
    }
    Ok((resp, loglik))
}

/// Weighted means and covariances; returns whether any covariance was ridged.
fn m_step<T: Scalar>(y: &Matrix<T>, resp: &Matrix<T>, p: &mut Params<T>, collapses: &mut usize) -> Result<bool> {
    let (n, m) = y.shape();
    let k = p.weights.len();
    let mut ridged = false;
    for g in 0..k {
        let ng: f64 = (0..n).map(|i| resp[(i, g)].as_f64()).sum();
        if !(ng > 1e-10 * n as f64) {
            return Err(IcsError::DegenerateFit(format!("component {} lost all its mass", g + 1)));
        }
        let mut mean = vec![0.0; m];
        for i in 0..n {
            let r = resp[(i, g)].as_f64();
            for (acc, &v) in mean.iter_mut().zip(y.row(i)) {
                *acc += r * v.as_f64();
            }
        }
        mean.iter_mut().for_each(|v| *v /= ng);
        let mut cov = Matrix::<f64>::zeros(m, m);
        let mut buf = vec![0.0; m];
        for i in 0..n {
            for (b, (&v, &mu)) in buf.iter_mut().zip(y.row(i).iter().zip(&mean)) {
                *b = v.as_f64() - mu;
            }
            cov.rank_one_update_upper(&buf, resp[(i, g)].as_f64());
        }
        cov.mirror_upper();
        let mut cov: Matrix<T> = cov.scaled(1.0 / ng).cast();
        if guard_covariance(&mut cov)? {
            ridged = true;
            *collapses += 1;
            if *collapses > MAX_COLLAPSES {
                return Err(IcsError::DegenerateFit(format!(
                    "covariance of component {} collapsed repeatedly",
                    g + 1
                )));
            }
        }
        p.weights[g] = ng / n as f64;
        for (dst, &v) in p.means.row_mut(g).iter_mut().zip(&mean) {
            *dst = T::lit(v);
        }
        p.covs[g] = cov;
    }
    if resp.cols() > k {
        p.noise_weight = (0..n).map(|i| resp[(i, k)].as_f64()).sum::<f64>() / n as f64;
    }
    Ok(ridged)
}

fn initial_params<T: Scalar>(
    y: &Matrix<T>,
    labels: &[usize],
    k: usize,
    with_noise: bool,
    collapses: &mut usize,
) -> Result<(Params<T>, bool)> {
    let n = y.rows();
    let mut resp = Matrix::zeros(n, k);
    for (i, &l) in labels.iter().enumerate() {
        if l != NOISE {
            resp[(i, l - 1)] = T::one();
        }
    }
    let mut p = Params {
        weights: vec![0.0; k],
        noise_weight: 0.0,
        means: Matrix::zeros(k, y.cols()),
        covs: vec![Matrix::identity(y.cols()); k],
    };
    let ridged = m_step(y, &resp, &mut p, collapses)?;
    let total: f64 = p.weights.iter().sum();
    p.weights.iter_mut().for_each(|w| *w /= total);
    if with_noise {
        p.weights.iter_mut().for_each(|w| *w *= 1.0 - INITIAL_NOISE);
        p.noise_weight = INITIAL_NOISE;
    }
    Ok((p, ridged))
}

fn em_start<T: Scalar>(
    y: &Matrix<T>,
    k: usize,
    log_noise_density: Option<f64>,
    opts: &GmmOptions,
    rng: &mut rng::Rng,
) -> Result<Fit<T>> {
    // with a noise component the initial partition is a trimmed one, the
    // trimmed rows seeding the noise
    let n_trim = if log_noise_density.is_some() {
        (INITIAL_NOISE * y.rows() as f64).ceil() as usize
    } else {
        0
    };
    let n_trim = n_trim.min(y.rows().saturating_sub(k + 1));
    let init = single_start(y, k, n_trim, 300, rng);
    let mut collapses = 0;
    let (mut params, mut ridged) = initial_params(y, &init.labels, k, log_noise_density.is_some(), &mut collapses)?;
    let mut regularized = ridged;
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut history = Vec::new();
    loop {
        let (resp, loglik) = e_step(y, &params, log_noise_density)?;
        history.push(loglik);
        debug_assert!(
            ridged || prev == f64::NEG_INFINITY || loglik >= prev - 1e-9 * prev.abs().max(1.0),
            "EM log-likelihood decreased from {prev} to {loglik}"
        );
        if iterations > 0 && ((loglik - prev) / loglik.abs().max(f64::MIN_POSITIVE)).abs() < opts.tol {
            converged = true;
        }
        if converged || iterations >= opts.max_iter {
            return Ok(Fit {
                params,
                resp,
                loglik,
                history,
                iterations,
                converged,
                regularized,
            });
        }
        prev = loglik;
        iterations += 1;
        ridged = m_step(y, &resp, &mut params, &mut collapses)?;
        regularized |= ridged;
    }
}

/// Full-covariance Gaussian mixture fitted by EM from k-means starts,
/// optionally with a uniform noise component over the bounding box of `y`.
/// The objective is the maximized log-likelihood.
pub fn gmm_em<T: Scalar>(
    y: &Matrix<T>,
    k: usize,
    with_noise: bool,
    opts: &GmmOptions,
    seed: u64,
) -> Result<ClusterResult<T>> {
    check_data(y)?;
    let (n, m) = y.shape();
    check_k(n, k)?;
    let df = k * (m + m * (m + 1) / 2) + k - 1;
    if df >= n {
        return validation(format!("a {k}-component mixture in {m} dimensions has {df} parameters for {n} rows"));
    }
    let log_noise_density = if with_noise {
        let mut log_volume = 0.0;
        for j in 0..m {
            let col = y.column(j);
            let lo = col.iter().copied().fold(T::infinity(), T::min);
            let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
            let range = (hi - lo).as_f64();
            if !(range > 0.0) {
                return Err(IcsError::DegenerateColumn { column: j });
            }
            log_volume += range.ln();
        }
        Some(-log_volume)
    } else {
        None
    };
    let fits: Vec<Result<Fit<T>>> = (0..opts.n_starts.max(1))
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(seed, s as u64 + 1);
            em_start(y, k, log_noise_density, opts, &mut r)
        })
        .collect();
    let mut best: Option<Fit<T>> = None;
    let mut first_err = None;
    for f in fits {
        match f {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.loglik > b.loglik) {
                    best = Some(f);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let fit = match best {
        Some(f) => f,
        None => return Err(first_err.expect("every start failed")),
    };
    let raw: Vec<usize> = (0..n)
        .map(|i| {
            let row = fit.resp.row(i);
            let mut arg = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[arg] {
                    arg = c;
                }
            }
            if arg == k {
                NOISE
            } else {
                arg + 1
            }
        })
        .collect();
    let (labels, mut order) = canonical_order(&raw, k);
    let centers = fit.params.means.select_rows(&order);
    let mixture = MixtureParams {
        weights: order.iter().map(|&g| fit.params.weights[g]).collect(),
        noise_weight: fit.params.noise_weight,
        covariances: order.iter().map(|&g| fit.params.covs[g].clone()).collect(),
    };
    if with_noise {
        order.push(k);
    }
    let resp = Matrix::from_fn(n, order.len(), |i, j| fit.resp[(i, order[j])]);
    Ok(ClusterResult {
        labels,
        centers,
        method: if with_noise {
            ClusterMethod::GmmNoise
        } else {
            ClusterMethod::Gmm
        },
        objective: fit.loglik,
        iterations: fit.iterations,
        converged: fit.converged,
        history: fit.history,
        responsibilities: Some(resp),
        regularized: fit.regularized,
        mixture: Some(mixture),
    })
}
