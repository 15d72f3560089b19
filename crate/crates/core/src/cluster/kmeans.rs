use rand::Rng;
use rayon::prelude::*;

use super::{canonicalize, check_k, ClusterMethod, ClusterResult, NOISE};
use crate::error::{validation, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::matstat::check_data;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOptions {
    pub n_starts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            n_starts: 25,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LloydFit<T> {
    pub centers: Matrix<T>,
    /// 1-based cluster labels, 0 for trimmed rows.
    pub labels: Vec<usize>,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Greedy spreading seeding: each new center is drawn with probability
/// proportional to the squared distance to the nearest chosen center.
fn plus_plus<T: Scalar>(y: &Matrix<T>, k: usize, rng: &mut rng::Rng) -> Matrix<T> {
    let n = y.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<T> = (0..n).map(|i| sq_dist(y.row(i), y.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().map(|v| v.as_f64()).sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, v) in d2.iter().enumerate() {
                acc += v.as_f64();
                if acc > target && *v > T::zero() {
                    pick = i;
                    break;
                }
            }
            while d2[pick] == T::zero() {
                pick -= 1;
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k ≤ n")
        };
        chosen.push(next);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(y.row(i), y.row(next)));
        }
    }
    y.select_rows(&chosen)
}

fn nearest<T: Scalar>(row: &[T], centers: &Matrix<T>) -> (usize, T) {
    let mut best = (0, sq_dist(row, centers.row(0)));
    for g in 1..centers.rows() {
        let d = sq_dist(row, centers.row(g));
        if d < best.1 {
            best = (g, d);
        }
    }
    best
}

/// Lloyd iterations from `centers`, discarding the `n_trim` rows farthest
/// from their nearest center before every center update.
pub(crate) fn lloyd<T: Scalar>(y: &Matrix<T>, mut centers: Matrix<T>, n_trim: usize, max_iter: usize) -> LloydFit<T> {
    let (n, d) = y.shape();
    let k = centers.rows();
    let mut labels = vec![usize::MAX; n];
    let mut objective = T::infinity();
    let mut iterations = 0;
    let mut converged = false;
    let mut history = Vec::new();
    while iterations < max_iter {
        iterations += 1;
        let assign: Vec<(usize, T)> = (0..n).map(|i| nearest(y.row(i), &centers)).collect();
        let mut new_labels: Vec<usize> = assign.iter().map(|&(g, _)| g + 1).collect();
        if n_trim > 0 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                assign[b]
                    .1
                    .partial_cmp(&assign[a].1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            });
            for &i in &order[..n_trim] {
                new_labels[i] = NOISE;
            }
        }
        let new_objective: T = (0..n)
            .filter(|&i| new_labels[i] != NOISE)
            .map(|i| assign[i].1)
            .sum();
        debug_assert!(
            new_objective <= objective + T::lit(1e-9) * objective.abs().max(T::one()) || objective.is_infinite(),
            "k-means objective increased"
        );
        objective = new_objective;
        history.push(objective.as_f64());
        if new_labels == labels {
            converged = true;
            break;
        }
        labels = new_labels;

        let mut sums: Matrix<T> = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            if labels[i] != NOISE {
                let g = labels[i] - 1;
                counts[g] += 1;
                for (s, &v) in sums.row_mut(g).iter_mut().zip(y.row(i)) {
                    *s += v;
                }
            }
        }
        let mut taken = vec![false; n];
        for g in 0..k {
            if counts[g] > 0 {
                let c = T::from_usize_lossy(counts[g]);
                for (dst, &s) in centers.row_mut(g).iter_mut().zip(sums.row(g)) {
                    *dst = s / c;
                }
            } else {
                // reseed an empty cluster at the kept row worst served by its center
                let far = (0..n)
                    .filter(|&i| labels[i] != NOISE && !taken[i])
                    .max_by(|&a, &b| {
                        assign[a]
                            .1
                            .partial_cmp(&assign[b].1)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(b.cmp(&a))
                    });
                if let Some(i) = far {
                    taken[i] = true;
                    centers.row_mut(g).copy_from_slice(y.row(i));
                }
            }
        }
    }
    LloydFit {
        centers,
        labels,
        objective,
        iterations,
        converged,
        history,
    }
}

/// One k-means++ start followed by Lloyd iterations.
pub(crate) fn single_start<T: Scalar>(
    y: &Matrix<T>,
    k: usize,
    n_trim: usize,
    max_iter: usize,
    rng: &mut rng::Rng,
) -> LloydFit<T> {
    let init = plus_plus(y, k, rng);
    lloyd(y, init, n_trim, max_iter)
}

fn best_of_starts<T: Scalar>(y: &Matrix<T>, k: usize, n_trim: usize, opts: &KMeansOptions, seed: u64) -> LloydFit<T> {
    let fits: Vec<LloydFit<T>> = (0..opts.n_starts.max(1))
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(seed, s as u64 + 1);
            single_start(y, k, n_trim, opts.max_iter, &mut r)
        })
        .collect();
    let mut best = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.objective < fits[best].objective {
            best = i;
        }
    }
    fits.into_iter().nth(best).expect("at least one start")
}

fn finish<T: Scalar>(fit: LloydFit<T>, method: ClusterMethod) -> ClusterResult<T> {
    let (labels, centers) = canonicalize(&fit.labels, &fit.centers);
    ClusterResult {
        labels,
        centers,
        method,
        objective: fit.objective.as_f64(),
        iterations: fit.iterations,
        converged: fit.converged,
        history: fit.history,
        responsibilities: None,
        regularized: false,
        mixture: None,
    }
}

/// Best of `n_starts` k-means++ seeded Lloyd runs; objective is the within-cluster sum of squares.
pub fn kmeans<T: Scalar>(y: &Matrix<T>, k: usize, opts: &KMeansOptions, seed: u64) -> Result<ClusterResult<T>> {
    check_data(y)?;
    check_k(y.rows(), k)?;
    Ok(finish(best_of_starts(y, k, 0, opts, seed), ClusterMethod::Kmeans))
}

/// Trimmed k-means: ⌈trim·n⌉ rows are discarded at every iteration and labelled 0.
pub fn tkmeans<T: Scalar>(
    y: &Matrix<T>,
    k: usize,
    trim: f64,
    opts: &KMeansOptions,
    seed: u64,
) -> Result<ClusterResult<T>> {
    check_data(y)?;
    let n = y.rows();
    check_k(n, k)?;
    if !(0.0..1.0).contains(&trim) {
        return validation(format!("trimming proportion must lie in [0, 1), got {trim}"));
    }
    let n_trim = (trim * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if n_trim > 0 && n_trim + k >= n {
        return validation(format!("trimming {n_trim} of {n} rows leaves too few for {k} clusters"));
    }
    Ok(finish(best_of_starts(y, k, n_trim, opts, seed), ClusterMethod::Tkmeans { trim }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ari;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_singletons() {
        let y = Matrix::column_vector(&[0.0, 5.0]);
        let r = kmeans(&y, 2, &KMeansOptions::default(), 1).unwrap();
        assert_eq!(r.labels, vec![1, 2]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let y = Matrix::column_vector(&[0.0, 5.0]);
        assert!(kmeans(&y, 3, &KMeansOptions::default(), 1).is_err());
    }

    #[test]
    fn zero_trim_equals_kmeans() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Matrix<f64> = Matrix::from_fn(200, 2, |i, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z + (i % 3) as f64 * 4.0
        });
        let a = kmeans(&y, 3, &KMeansOptions::default(), 9).unwrap();
        let b = tkmeans(&y, 3, 0.0, &KMeansOptions::default(), 9).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.objective, b.objective);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*a.history.last().unwrap(), a.objective);
    }

    #[test]
    fn trims_exact_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Matrix<f64> = Matrix::from_fn(20, 2, |_, _| StandardNormal.sample(&mut rng));
        let r = tkmeans(&y, 2, 0.1, &KMeansOptions::default(), 1).unwrap();
        assert_eq!(r.labels.iter().filter(|&&l| l == NOISE).count(), 2);
        assert!(tkmeans(&y, 2, 0.9, &KMeansOptions::default(), 1).is_err());
    }

    #[test]
    fn trimmed_set_is_the_noise() {
        let mut good = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let n = 400;
            let n_noise = 20;
            let mut truth = Vec::new();
            let y: Matrix<f64> = Matrix::from_fn(n, 2, |i, _| {
                if i < n_noise {
                    rng.random_range(-60.0..60.0)
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.5 * z + if i % 2 == 0 { -5.0 } else { 5.0 }
                }
            });
            for i in 0..n {
                truth.push(if i < n_noise { 0 } else { 1 + i % 2 });
            }
            let r = tkmeans(&y, 2, 0.05, &KMeansOptions::default(), seed).unwrap();
            if ari(&r.labels, &truth).unwrap() == 1.0 {
                good += 1;
            }
        }
        assert!(good >= 18, "{good}/20");
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y: Matrix<f64> = Matrix::from_fn(300, 3, |_, _| StandardNormal.sample(&mut rng));
        let a = kmeans(&y, 4, &KMeansOptions::default(), 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| kmeans(&y, 4, &KMeansOptions::default(), 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_rows_do_not_break_seeding() {
        let y = Matrix::column_vector(&[1.0, 1.0, 1.0, 1.0]);
        let r = kmeans(&y, 2, &KMeansOptions::default(), 0).unwrap();
        assert_eq!(r.objective, 0.0);
    }
}
