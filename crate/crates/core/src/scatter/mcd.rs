//! Minimum covariance determinant: FAST-MCD search, exhaustive search for
//! tiny samples, and the one-step reweighted estimator.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{EstimatorId, ScatterEstimate};
use crate::error::{validation, IcsError, Result};
use crate::matrix::Matrix;
use crate::matstat::{check_data, cholesky, log_det_spd, mahalanobis_rows_chol, scatter_about};
use crate::rng;
use crate::scalar::Scalar;

/// Tuning of the FAST-MCD search.
#[derive(Debug, Clone, PartialEq)]
pub struct McdOptions {
    /// Random (d+1)-subsets drawn in total.
    pub n_starts: usize,
    /// C-steps applied to every start before ranking.
    pub initial_csteps: usize,
    /// Candidates carried into each refinement stage.
    pub n_best: usize,
    /// Cap on C-steps during final convergence.
    pub max_csteps: usize,
    /// Samples larger than this are searched through disjoint subsets.
    pub partition_threshold: usize,
    pub subset_size: usize,
    pub max_subsets: usize,
    /// Size cap of the merged set used between the subset and full-data stages.
    pub merged_max: usize,
}

impl Default for McdOptions {
    fn default() -> Self {
        Self {
            n_starts: 500,
            initial_csteps: 2,
            n_best: 10,
            max_csteps: 100,
            partition_threshold: 600,
            subset_size: 300,
            max_subsets: 5,
            merged_max: 1500,
        }
    }
}

/// `c_α = α / F_{χ²_{d+2}}(q_α)` with `q_α` the α-quantile of `χ²_d`.
pub fn mcd_consistency_factor(alpha: f64, d: usize) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let q = ChiSquared::new(d as f64).expect("positive df").inverse_cdf(alpha);
    alpha / ChiSquared::new((d + 2) as f64).expect("positive df").cdf(q)
}

fn subset_size(alpha: f64, n: usize) -> usize {
    // guard against 0.5 * 6 = 3.0000000000000004 style round-up
    ((alpha * n as f64) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Clone)]
struct Candidate<T> {
    mean: Vec<T>,
    /// Covariance of the subset with the 1/h denominator.
    cov: Matrix<T>,
    log_det: T,
    /// Subset rows, ascending, relative to the data set the candidate was last fitted on.
    subset: Option<Vec<usize>>,
    trace: Vec<f64>,
    steps: usize,
}

fn fit_subset<T: Scalar>(x: &Matrix<T>, idx: &[usize]) -> Option<Candidate<T>> {
    let sub = x.select_rows(idx);
    let mean = sub.col_means();
    let cov = scatter_about(&sub, &mean, T::from_usize_lossy(idx.len()));
    let log_det = log_det_spd(&cov)?;
    Some(Candidate {
        mean,
        cov,
        log_det,
        subset: Some(idx.to_vec()),
        trace: vec![log_det.as_f64()],
        steps: 0,
    })
}

/// Indices of the `h` rows closest to the candidate in its own metric, ascending.
fn closest_rows<T: Scalar>(x: &Matrix<T>, cand: &Candidate<T>, h: usize) -> Option<Vec<usize>> {
    let l = cholesky(&cand.cov)?;
    let d2 = mahalanobis_rows_chol(x, &cand.mean, &l);
    let mut order: Vec<(T, usize)> = d2.into_iter().zip(0..).collect();
    let cmp = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    if h < order.len() {
        order.select_nth_unstable_by(h - 1, cmp);
    }
    let mut idx: Vec<usize> = order[..h].iter().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    Some(idx)
}

/// Applies up to `max_steps` C-steps; stops early once the subset repeats.
fn c_steps<T: Scalar>(x: &Matrix<T>, mut cand: Candidate<T>, h: usize, max_steps: usize) -> Option<Candidate<T>> {
    for _ in 0..max_steps {
        let next = closest_rows(x, &cand, h)?;
        if cand.subset.as_deref() == Some(next.as_slice()) {
            break;
        }
        let fitted = fit_subset(x, &next)?;
        // C-step monotonicity; a transferred candidate has no comparable determinant yet
        if cand.subset.is_some() {
            debug_assert!(
                fitted.log_det <= cand.log_det + T::lit(1e-8) * cand.log_det.abs().max(T::one()),
                "C-step increased the determinant"
            );
        }
        let mut trace = std::mem::take(&mut cand.trace);
        if cand.subset.is_none() {
            trace.clear();
        }
        trace.push(fitted.log_det.as_f64());
        cand = Candidate {
            trace,
            steps: cand.steps + 1,
            ..fitted
        };
    }
    Some(cand)
}

/// Random (d+1)-subset, enlarged until its covariance is nonsingular, followed by C-steps.
fn random_start<T: Scalar>(x: &Matrix<T>, h: usize, seed: u64, stream: u64, steps: usize) -> Option<Candidate<T>> {
    let (n, d) = x.shape();
    let mut rng = rng::stream(seed, stream);
    let mut perm: Vec<usize> = (0..n).collect();
    let take = (d + 1).min(n);
    perm.partial_shuffle(&mut rng, take);
    let mut size = take;
    let initial = loop {
        if let Some(c) = fit_subset(x, &perm[..size]) {
            break c;
        }
        if size >= h || size >= n {
            return None;
        }
        let j = rng.random_range(size..n);
        perm.swap(size, j);
        size += 1;
    };
    let first = closest_rows(x, &initial, h)?;
    let cand = fit_subset(x, &first)?;
    c_steps(x, cand, h, steps)
}

fn keep_best<T: Scalar>(mut cands: Vec<(usize, Candidate<T>)>, n_best: usize) -> Vec<Candidate<T>> {
    cands.sort_by(|a, b| {
        a.1.log_det
            .partial_cmp(&b.1.log_det)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    cands.truncate(n_best);
    cands.into_iter().map(|(_, c)| c).collect()
}

fn transferred<T: Scalar>(c: &Candidate<T>) -> Candidate<T> {
    Candidate {
        subset: None,
        trace: Vec::new(),
        steps: 0,
        ..c.clone()
    }
}

fn fast_mcd<T: Scalar>(x: &Matrix<T>, h: usize, opts: &McdOptions, seed: u64) -> Result<Candidate<T>> {
    let n = x.rows();
    let n_best = opts.n_best.max(1);
    let finalists: Vec<Candidate<T>> = if n <= opts.partition_threshold {
        let starts: Vec<(usize, Candidate<T>)> = (0..opts.n_starts.max(1))
            .into_par_iter()
            .filter_map(|s| random_start(x, h, seed, s as u64 + 1, opts.initial_csteps).map(|c| (s, c)))
            .collect();
        keep_best(starts, n_best)
    } else {
        let mut rng0 = rng::stream(seed, 0);
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut rng0);
        pool.truncate(opts.merged_max.min(n));
        let m = pool.len();
        let k = (m / opts.subset_size.max(1)).clamp(1, opts.max_subsets.max(1));
        let per_subset = (opts.n_starts / k).max(1);
        let mut pooled: Vec<(usize, Candidate<T>)> = Vec::new();
        for g in 0..k {
            let lo = g * m / k;
            let hi = (g + 1) * m / k;
            let mut rows = pool[lo..hi].to_vec();
            rows.sort_unstable();
            let xs = x.select_rows(&rows);
            let hs = ((rows.len() * h) as f64 / n as f64).ceil() as usize;
            let hs = hs.clamp(x.cols() + 1, rows.len());
            let starts: Vec<(usize, Candidate<T>)> = (0..per_subset)
                .into_par_iter()
                .filter_map(|s| {
                    let id = g * per_subset + s;
                    random_start(&xs, hs, seed, id as u64 + 1, opts.initial_csteps).map(|c| (id, c))
                })
                .collect();
            pooled.extend(
                keep_best(starts, n_best)
                    .into_iter()
                    .enumerate()
                    .map(|(r, c)| (g * n_best + r, c)),
            );
        }
        let mut merged_rows = pool.clone();
        merged_rows.sort_unstable();
        let xm = x.select_rows(&merged_rows);
        let hm = (((m * h) as f64 / n as f64).ceil() as usize).clamp(x.cols() + 1, m);
        let refined: Vec<(usize, Candidate<T>)> = pooled
            .par_iter()
            .filter_map(|(id, c)| c_steps(&xm, transferred(c), hm, opts.initial_csteps).map(|c| (*id, c)))
            .collect();
        keep_best(refined, n_best)
    };
    let converged: Vec<(usize, Candidate<T>)> = finalists
        .par_iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let start = if n <= opts.partition_threshold {
                c.clone()
            } else {
                transferred(c)
            };
            c_steps(x, start, h, opts.max_csteps).map(|c| (i, c))
        })
        .collect();
    keep_best(converged, 1).pop().ok_or_else(|| IcsError::Singular {
        eigenvalue: 0.0,
        cutoff: 0.0,
        context: "every MCD candidate subset has a singular covariance".into(),
    })
}

fn check_mcd_input<T: Scalar>(x: &Matrix<T>, alpha: T) -> Result<usize> {
    check_data(x)?;
    let (n, d) = x.shape();
    if !(alpha > T::zero() && alpha <= T::one()) {
        return validation(format!("mcd: alpha must lie in (0, 1], got {alpha}"));
    }
    let h = subset_size(alpha.as_f64(), n);
    if h <= d {
        return validation(format!("mcd: subset size {h} must exceed the dimension {d}"));
    }
    Ok(h)
}

fn finish<T: Scalar>(alpha: T, d: usize, best: Candidate<T>) -> ScatterEstimate<T> {
    let c = T::lit(mcd_consistency_factor(alpha.as_f64(), d));
    let mut est = ScatterEstimate::new(
        best.mean,
        best.cov.scaled(c),
        EstimatorId::Mcd { alpha: alpha.as_f64() },
    );
    est.diagnostics.subset = best.subset;
    est.diagnostics.cstep_log_dets = best.trace;
    est.diagnostics.iterations = best.steps;
    est
}

/// Raw MCD with the FAST-MCD search; deterministic for a given seed.
pub fn mcd<T: Scalar>(x: &Matrix<T>, alpha: T, opts: &McdOptions, seed: u64) -> Result<ScatterEstimate<T>> {
    let h = check_mcd_input(x, alpha)?;
    let n = x.rows();
    let best = if h == n {
        let all: Vec<usize> = (0..n).collect();
        fit_subset(x, &all).ok_or_else(|| IcsError::Singular {
            eigenvalue: 0.0,
            cutoff: 0.0,
            context: "covariance of the full sample".into(),
        })?
    } else {
        fast_mcd(x, h, opts, seed)?
    };
    Ok(finish(alpha, x.cols(), best))
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let h = idx.len();
    let mut i = h;
    while i > 0 {
        i -= 1;
        if idx[i] < n - h + i {
            idx[i] += 1;
            for j in i + 1..h {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Raw MCD by enumerating every subset; only for tiny samples (at most 20 rows).
pub fn mcd_exhaustive<T: Scalar>(x: &Matrix<T>, alpha: T) -> Result<ScatterEstimate<T>> {
    let h = check_mcd_input(x, alpha)?;
    let n = x.rows();
    if n > 20 {
        return validation(format!("exhaustive MCD is limited to 20 rows, got {n}"));
    }
    let mut idx: Vec<usize> = (0..h).collect();
    let mut best: Option<Candidate<T>> = None;
    loop {
        if let Some(c) = fit_subset(x, &idx) {
            if best.as_ref().is_none_or(|b| c.log_det < b.log_det) {
                best = Some(c);
            }
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    let best = best.ok_or_else(|| IcsError::Singular {
        eigenvalue: 0.0,
        cutoff: 0.0,
        context: "every MCD subset has a singular covariance".into(),
    })?;
    Ok(finish(alpha, x.cols(), best))
}

/// One-step reweighting of a raw MCD estimate.
///
/// Rows whose squared distance under the raw estimate is at most the 0.975
/// quantile of `χ²_d` keep weight one; the rest are dropped. The retained
/// covariance is rescaled by `0.975 / F_{χ²_{d+2}}(χ²_{d,0.975})`.
pub fn rmcd_from_raw<T: Scalar>(x: &Matrix<T>, raw: &ScatterEstimate<T>) -> Result<ScatterEstimate<T>> {
    let d = x.cols();
    let alpha = match raw.estimator {
        EstimatorId::Mcd { alpha } => alpha,
        _ => return validation("rmcd expects a raw MCD estimate"),
    };
    let l = cholesky(&raw.matrix).ok_or_else(|| IcsError::Singular {
        eigenvalue: 0.0,
        cutoff: 0.0,
        context: "raw MCD scatter".into(),
    })?;
    let d2 = mahalanobis_rows_chol(x, &raw.location, &l);
    let chi_d = ChiSquared::new(d as f64).expect("positive df");
    let cutoff = chi_d.inverse_cdf(0.975);
    let retained: Vec<usize> = d2
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.as_f64() <= cutoff)
        .map(|(i, _)| i)
        .collect();
    if retained.len() < d + 1 {
        return Err(IcsError::DegenerateWeighting {
            retained: retained.len(),
            required: d + 1,
        });
    }
    let sub = x.select_rows(&retained);
    let mean = sub.col_means();
    let cov = scatter_about(&sub, &mean, T::from_usize_lossy(retained.len() - 1));
    let factor = 0.975 / ChiSquared::new((d + 2) as f64).expect("positive df").cdf(cutoff);
    let mut est = ScatterEstimate::new(mean, cov.scaled(T::lit(factor)), EstimatorId::Rmcd { alpha });
    est.diagnostics = raw.diagnostics.clone();
    est.diagnostics.retained = Some(retained);
    Ok(est)
}

/// Reweighted MCD.
pub fn rmcd<T: Scalar>(x: &Matrix<T>, alpha: T, opts: &McdOptions, seed: u64) -> Result<ScatterEstimate<T>> {
    let raw = mcd(x, alpha, opts, seed)?;
    rmcd_from_raw(x, &raw)
}
