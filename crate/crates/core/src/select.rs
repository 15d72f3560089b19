//! Component-selection criteria for invariant coordinates.
//!
//! All indices are 0-based and returned in ascending order.

use std::fmt;
use std::str::FromStr;

use statrs::function::erf::erfc;

use crate::error::{validation, IcsError, Result};
use crate::ics::{project_columns, IcsResult};
use crate::matrix::Matrix;
use crate::metrics::eta2;
use crate::scalar::Scalar;
use crate::scatter::median;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    Med,
    Var,
    Normal { level: f64 },
    Oracle,
}

impl Criterion {
    pub const DEFAULT_LEVEL: f64 = 0.05;
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Med => write!(f, "med"),
            Criterion::Var => write!(f, "var"),
            Criterion::Normal { level } => write!(f, "normal:{level}"),
            Criterion::Oracle => write!(f, "oracle"),
        }
    }
}

impl FromStr for Criterion {
    type Err = IcsError;

    fn from_str(s: &str) -> Result<Self> {
        let err = |m: &str| IcsError::Spec {
            spec: s.to_string(),
            message: m.to_string(),
        };
        let lower = s.trim().to_ascii_lowercase();
        match lower.split_once(':') {
            None => match lower.as_str() {
                "med" => Ok(Criterion::Med),
                "var" => Ok(Criterion::Var),
                "oracle" => Ok(Criterion::Oracle),
                "normal" => Ok(Criterion::Normal {
                    level: Self::DEFAULT_LEVEL,
                }),
                _ => Err(err("unknown criterion")),
            },
            Some(("normal", lvl)) => match lvl.parse::<f64>() {
                Ok(level) if level > 0.0 && level < 1.0 => Ok(Criterion::Normal { level }),
                _ => Err(err("significance level must lie in (0, 1)")),
            },
            Some(_) => Err(err("unknown criterion or unexpected parameter")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub criterion: Criterion,
    /// Per-component deviations (med), per-window variances (var),
    /// per-component p-values (normal) or per-split η² (oracle, NaN when skipped).
    pub diagnostics: Vec<f64>,
    pub k: Option<usize>,
}

fn check_k(d: usize, k: usize) -> Result<()> {
    if k < 2 {
        return validation(format!("cluster count must be at least 2, got {k}"));
    }
    if k - 1 > d {
        return validation(format!("cannot keep k − 1 = {} of {d} components", k - 1));
    }
    Ok(())
}

/// The k−1 components whose eigenvalues deviate most from the median eigenvalue.
pub fn med_select<T: Scalar>(eigenvalues: &[T], k: usize) -> Result<SelectionResult> {
    check_k(eigenvalues.len(), k)?;
    let med = median(eigenvalues);
    let dev: Vec<f64> = eigenvalues.iter().map(|&l| (l - med).abs().as_f64()).collect();
    let mut order: Vec<usize> = (0..dev.len()).collect();
    order.sort_by(|&a, &b| dev[b].total_cmp(&dev[a]).then(a.cmp(&b)));
    let mut indices = order[..k - 1].to_vec();
    indices.sort_unstable();
    Ok(SelectionResult {
        indices,
        criterion: Criterion::Med,
        diagnostics: dev,
        k: Some(k),
    })
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Complement of the contiguous window of d−k+1 eigenvalues with the smallest variance.
pub fn var_select<T: Scalar>(eigenvalues: &[T], k: usize) -> Result<SelectionResult> {
    let d = eigenvalues.len();
    check_k(d, k)?;
    let len = d + 1 - k;
    if len < 2 {
        return validation(format!("variance window of length {len} needs at least 2 eigenvalues"));
    }
    let values: Vec<f64> = eigenvalues.iter().map(|v| v.as_f64()).collect();
    let vars: Vec<f64> = values.windows(len).map(sample_variance).collect();
    let mut best = 0;
    for (i, &v) in vars.iter().enumerate() {
        if v < vars[best] {
            best = i;
        }
    }
    let indices = (0..d).filter(|&i| i < best || i >= best + len).collect();
    Ok(SelectionResult {
        indices,
        criterion: Criterion::Var,
        diagnostics: vars,
        k: Some(k),
    })
}

/// D'Agostino's transformation of the sample skewness to a standard normal `z`,
/// with the two-sided p-value.
pub fn dagostino_skewness<T: Scalar>(x: &[T]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 9 {
        return validation(format!("skewness test needs at least 9 observations, got {n}"));
    }
    let v: Vec<f64> = x.iter().map(|t| t.as_f64()).collect();
    let nf = n as f64;
    let mean = v.iter().sum::<f64>() / nf;
    let m2 = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / nf;
    let m3 = v.iter().map(|a| (a - mean).powi(3)).sum::<f64>() / nf;
    if !(m2 > 0.0) {
        return validation("skewness test on a constant sample");
    }
    let g1 = m3 / m2.powf(1.5);
    let y = g1 * ((nf + 1.0) * (nf + 3.0) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let r = y / alpha;
    let z = delta * (r + (r * r + 1.0).sqrt()).ln();
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok((z, p))
}

/// Sequential skewness scan from both ends of the component order.
///
/// Components are kept from the front while the test rejects at `level`,
/// then likewise from the back; the union may be empty.
pub fn normal_select<T: Scalar>(scores: &Matrix<T>, level: f64) -> Result<SelectionResult> {
    let d = scores.cols();
    let p: Vec<f64> = (0..d)
        .map(|j| dagostino_skewness(&scores.column(j)).map(|(_, p)| p))
        .collect::<Result<_>>()?;
    let mut keep = vec![false; d];
    for j in 0..d {
        if p[j] >= level {
            break;
        }
        keep[j] = true;
    }
    for j in (0..d).rev() {
        if keep[j] || p[j] >= level {
            break;
        }
        keep[j] = true;
    }
    Ok(SelectionResult {
        indices: (0..d).filter(|&j| keep[j]).collect(),
        criterion: Criterion::Normal { level },
        diagnostics: p,
        k: None,
    })
}

/// Among the splits "first j and last k−1−j components", the one with the largest η².
pub fn oracle_select<T: Scalar>(scores: &Matrix<T>, labels: &[usize], k: usize) -> Result<SelectionResult> {
    let d = scores.cols();
    check_k(d, k)?;
    if labels.len() != scores.rows() {
        return validation(format!("{} labels for {} rows", labels.len(), scores.rows()));
    }
    let m = k - 1;
    let split = |j: usize| -> Vec<usize> { (0..j).chain(d - (m - j)..d).collect() };
    let mut diagnostics = vec![f64::NAN; m + 1];
    let mut best: Option<(f64, usize)> = None;
    // front-heavy splits win ties
    for j in (0..=m).rev() {
        let idx = split(j);
        match eta2(&project_columns(scores, &idx)?, labels) {
            Ok(e) => {
                let e = e.as_f64();
                diagnostics[j] = e;
                if best.is_none_or(|(b, _)| e > b) {
                    best = Some((e, j));
                }
            }
            Err(IcsError::Evaluation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let (_, j) = best.ok_or_else(|| IcsError::Evaluation("every oracle split has a singular total SSCP matrix".into()))?;
    let mut indices = split(j);
    indices.sort_unstable();
    Ok(SelectionResult {
        indices,
        criterion: Criterion::Oracle,
        diagnostics,
        k: Some(k),
    })
}

/// Applies `criterion` to an ICS result. `labels` are required by the oracle only.
pub fn select<T: Scalar>(
    criterion: Criterion,
    result: &IcsResult<T>,
    k: usize,
    labels: Option<&[usize]>,
) -> Result<SelectionResult> {
    match criterion {
        Criterion::Med => med_select(&result.eigenvalues, k),
        Criterion::Var => var_select(&result.eigenvalues, k),
        Criterion::Normal { level } => normal_select(&result.scores, level),
        Criterion::Oracle => match labels {
            Some(l) => oracle_select(&result.scores, l, k),
            None => validation("the oracle criterion needs true labels"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    #[test]
    fn med_examples() {
        let r = med_select(&[5.0, 1.2, 1.0, 1.0, 0.9], 3).unwrap();
        assert_eq!(r.indices, vec![0, 1]);
        assert_eq!(med_select(&[1.0, 1.0, 1.0], 2).unwrap().indices, vec![0]);
        assert_eq!(med_select(&[2.0, 1.0, 0.2], 2).unwrap().indices, vec![0]);
        assert!(med_select(&[2.0, 1.0], 4).is_err());
    }

    #[test]
    fn var_examples() {
        assert_eq!(var_select(&[5.0, 2.0, 1.01, 1.0, 0.99], 3).unwrap().indices, vec![0, 1]);
        assert_eq!(var_select(&[1.0; 5], 3).unwrap().indices, vec![3, 4]);
        assert_eq!(var_select(&[3.0, 1.0, 1.0, 0.1], 2).unwrap().indices, vec![0]);
        assert!(var_select(&[3.0, 1.0], 2).is_err());
    }

    #[test]
    fn selections_unchanged_by_rescaling() {
        let l = [4.0, 1.7, 1.1, 1.0, 0.95, 0.3];
        for c in [0.01, 3.0, 1e4] {
            let s: Vec<f64> = l.iter().map(|v| v * c).collect();
            for k in 2..=5 {
                assert_eq!(med_select(&l, k).unwrap().indices, med_select(&s, k).unwrap().indices);
                assert_eq!(var_select(&l, k).unwrap().indices, var_select(&s, k).unwrap().indices);
            }
        }
    }

    #[test]
    fn skewness_matches_reference_values() {
        // reference values from scipy.stats.skewtest
        let x = [0.1, 0.5, 0.2, 3.0, 0.4, 0.8, 1.5, 0.05, 0.3, 2.2, 0.7, 0.9];
        let (z, p) = dagostino_skewness(&x).unwrap();
        assert!((z - 2.2286376647738124).abs() < 1e-12);
        assert!((p - 0.02583802286563888).abs() < 1e-10, "{p}");
        let x = [1.2, -0.5, 0.3, 2.5, -1.1, 0.8, 0.0, -0.3, 1.9, -2.2, 0.6];
        let (z, p) = dagostino_skewness(&x).unwrap();
        assert!((z + 0.2436571173711053).abs() < 1e-12);
        assert!((p - 0.8074963878465304).abs() < 1e-10);
    }

    #[test]
    fn skewness_of_symmetric_sample() {
        let x: Vec<f64> = (-4..=4).map(f64::from).collect();
        let (z, p) = dagostino_skewness(&x).unwrap();
        assert!(z.abs() < 1e-12 && (p - 1.0).abs() < 1e-12);
        assert!(dagostino_skewness(&[1.0; 10]).is_err());
        assert!(dagostino_skewness(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn skewness_power_on_exponential() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1000).map(|_| Exp1.sample(&mut rng)).collect();
            if dagostino_skewness(&x).unwrap().1 < 0.01 {
                hits += 1;
            }
        }
        assert!(hits >= 99);
    }

    #[test]
    fn skewness_size_under_null() {
        let mut rejections = 0;
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
            if dagostino_skewness(&x).unwrap().1 < 0.05 {
                rejections += 1;
            }
        }
        assert!((30..=70).contains(&rejections), "{rejections}");
    }

    #[test]
    fn normal_scan_from_both_ends() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 500;
        let scores: Matrix<f64> = Matrix::from_fn(n, 5, |_, j| match j {
            0 | 4 => Exp1.sample(&mut rng),
            _ => StandardNormal.sample(&mut rng),
        });
        assert_eq!(normal_select(&scores, 0.05).unwrap().indices, vec![0, 4]);
        let flipped = scores.map(|v| -3.0 * v + 1.0);
        assert_eq!(normal_select(&flipped, 0.05).unwrap().indices, vec![0, 4]);
    }

    #[test]
    fn normal_invariance_under_column_affine_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let scores: Matrix<f64> = Matrix::from_fn(200, 3, |_, _| Exp1.sample(&mut rng));
        let a = normal_select(&scores, 0.05).unwrap();
        let b = normal_select(&scores.map(|v| -0.5 * v + 7.0), 0.05).unwrap();
        assert_eq!(a.indices, b.indices);
        for (p, q) in a.diagnostics.iter().zip(&b.diagnostics) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_null_is_usually_empty() {
        let mut empty = 0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Matrix<f64> = Matrix::from_fn(1000, 10, |_, _| StandardNormal.sample(&mut rng));
            if normal_select(&scores, 0.05).unwrap().indices.is_empty() {
                empty += 1;
            }
        }
        assert!(empty >= 170, "{empty}");
    }

    #[test]
    fn oracle_finds_trailing_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let labels: Vec<usize> = (0..n).map(|i| 1 + i % 3).collect();
        let scores = Matrix::from_fn(n, 6, |i, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            match (j, labels[i]) {
                (4, 2) => z + 8.0,
                (5, 3) => z + 8.0,
                _ => z,
            }
        });
        let r = oracle_select(&scores, &labels, 3).unwrap();
        assert_eq!(r.indices, vec![4, 5]);
        assert_eq!(r.diagnostics.len(), 3);
        let all = oracle_select(&scores.select_columns(&[0, 1]), &labels, 3).unwrap();
        assert_eq!(all.indices, vec![0, 1]);
    }

    #[test]
    fn criterion_grammar() {
        for s in ["med", "var", "normal:0.05", "oracle"] {
            assert_eq!(s.parse::<Criterion>().unwrap().to_string(), s);
        }
        assert_eq!("normal".parse::<Criterion>().unwrap(), Criterion::Normal { level: 0.05 });
        assert!("normal:2".parse::<Criterion>().is_err());
        assert!("best".parse::<Criterion>().is_err());
    }
}
