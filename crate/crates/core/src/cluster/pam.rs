use super::{canonicalize, check_k, ClusterMethod, ClusterResult};
use crate::error::{validation, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::matstat::check_data;
use crate::scalar::Scalar;

/// Largest row count accepted by [`pam`].
pub const PAM_MAX_ROWS: usize = 20_000;

fn dist<T: Scalar>(y: &Matrix<T>, a: usize, b: usize) -> f64 {
    sq_dist(y.row(a), y.row(b)).as_f64().sqrt()
}

struct Assignment {
    nearest: Vec<usize>,
    d_nearest: Vec<f64>,
    d_second: Vec<f64>,
}

fn assign<T: Scalar>(y: &Matrix<T>, medoids: &[usize]) -> Assignment {
    let n = y.rows();
    let mut a = Assignment {
        nearest: vec![0; n],
        d_nearest: vec![f64::INFINITY; n],
        d_second: vec![f64::INFINITY; n],
    };
    for j in 0..n {
        for (slot, &m) in medoids.iter().enumerate() {
            let d = dist(y, j, m);
            if d < a.d_nearest[j] {
                a.d_second[j] = a.d_nearest[j];
                a.d_nearest[j] = d;
                a.nearest[j] = slot;
            } else if d < a.d_second[j] {
                a.d_second[j] = d;
            }
        }
    }
    a
}

fn build<T: Scalar>(y: &Matrix<T>, k: usize) -> Vec<usize> {
    let n = y.rows();
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut d_nearest = vec![f64::INFINITY; n];
    let mut col = vec![0.0; n];
    while medoids.len() < k {
        // first medoid minimizes total distance, later ones maximize the reduction
        let mut best: Option<(usize, f64)> = None;
        for h in (0..n).filter(|&h| !is_medoid[h]) {
            for (j, c) in col.iter_mut().enumerate() {
                *c = dist(y, j, h);
            }
            let score = if medoids.is_empty() {
                -col.iter().sum::<f64>()
            } else {
                col.iter().zip(&d_nearest).map(|(&c, &dn)| (dn - c).max(0.0)).sum()
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((h, score));
            }
        }
        let (h, _) = best.expect("k ≤ n leaves a candidate");
        is_medoid[h] = true;
        medoids.push(h);
        for (j, dn) in d_nearest.iter_mut().enumerate() {
            *dn = dn.min(dist(y, j, h));
        }
    }
    medoids
}

/// Partitioning around medoids with Euclidean dissimilarities: BUILD, then
/// best-improvement SWAP until no swap lowers the total dissimilarity.
pub fn pam<T: Scalar>(y: &Matrix<T>, k: usize) -> Result<ClusterResult<T>> {
    check_data(y)?;
    let n = y.rows();
    check_k(n, k)?;
    if n > PAM_MAX_ROWS {
        return validation(format!("pam accepts at most {PAM_MAX_ROWS} rows, got {n}"));
    }
    let mut medoids = build(y, k);
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }
    let mut a = assign(y, &medoids);
    let mut total: f64 = a.d_nearest.iter().sum();
    let mut iterations = 0;
    let mut history = vec![total];
    let mut col = vec![0.0; n];
    let mut delta = vec![0.0; k];
    loop {
        iterations += 1;
        let mut best: Option<(f64, usize, usize)> = None;
        for h in (0..n).filter(|&h| !is_medoid[h]) {
            for (j, c) in col.iter_mut().enumerate() {
                *c = dist(y, j, h);
            }
            // change in total dissimilarity when medoid slot i is replaced by h
            let mut shared = 0.0;
            delta.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n {
                let gain = (col[j] - a.d_nearest[j]).min(0.0);
                shared += gain;
                delta[a.nearest[j]] += col[j].min(a.d_second[j]) - a.d_nearest[j] - gain;
            }
            for (i, &di) in delta.iter().enumerate() {
                let change = shared + di;
                if best.is_none_or(|(b, _, _)| change < b) {
                    best = Some((change, i, h));
                }
            }
        }
        match best {
            Some((change, i, h)) if change < -1e-12 * total.max(1.0) => {
                is_medoid[medoids[i]] = false;
                is_medoid[h] = true;
                medoids[i] = h;
                a = assign(y, &medoids);
                let new_total: f64 = a.d_nearest.iter().sum();
                debug_assert!(new_total < total, "swap did not improve");
                total = new_total;
                history.push(total);
            }
            _ => break,
        }
    }
    let raw: Vec<usize> = a.nearest.iter().map(|&s| s + 1).collect();
    let (labels, centers) = canonicalize(&raw, &y.select_rows(&medoids));
    Ok(ClusterResult {
        labels,
        centers,
        method: ClusterMethod::Pam,
        objective: total,
        iterations,
        converged: true,
        history,
        responsibilities: None,
        regularized: false,
        mixture: None,
    })
}
