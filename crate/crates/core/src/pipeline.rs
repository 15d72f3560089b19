//! Tandem clustering: reduce, select components, cluster, evaluate.

use std::fmt;
use std::str::FromStr;

use crate::cluster::{standardize, ClusterMethod, ClusterResult};
use crate::error::{IcsError, Result};
use crate::ics::{IcsResult, ScatterPair};
use crate::matrix::Matrix;
use crate::metrics::{ari, eta2};
use crate::pca::{pca, PcaResult, PcaRule};
use crate::rng;
use crate::scalar::Scalar;
use crate::scatter::EstimatorId;
use crate::select::{select, Criterion};

/// Dimension reduction applied before clustering.
///
/// Grammar: `none`, `pca:<estimator>:<rule>` (e.g. `pca:rmcd:0.75:pct80`) or
/// `ics:<v1>,<v2>[/<criterion>]` (e.g. `ics:tcov:2,cov/med`); the ICS
/// criterion defaults to `med`.
#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    None,
    Pca { scatter: EstimatorId, rule: PcaRule },
    Ics { pair: ScatterPair, criterion: Criterion },
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reduction::None => write!(f, "none"),
            Reduction::Pca { scatter, rule } => write!(f, "pca:{scatter}:{rule}"),
            Reduction::Ics { pair, criterion } => write!(f, "ics:{pair}/{criterion}"),
        }
    }
}

impl FromStr for Reduction {
    type Err = IcsError;

    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim().to_ascii_lowercase();
        let err = |m: String| IcsError::Spec {
            spec: s.to_string(),
            message: m,
        };
        if text == "none" {
            return Ok(Reduction::None);
        }
        if let Some(rest) = text.strip_prefix("pca:") {
            let (est, rule) = rest
                .rsplit_once(':')
                .ok_or_else(|| err("expected pca:<estimator>:<rule>".into()))?;
            return Ok(Reduction::Pca {
                scatter: est.parse().map_err(|e: IcsError| err(e.to_string()))?,
                rule: rule.parse().map_err(|e: IcsError| err(e.to_string()))?,
            });
        }
        if let Some(rest) = text.strip_prefix("ics:") {
            let (pair, criterion) = match rest.split_once('/') {
                Some((p, c)) => (p, c.parse().map_err(|e: IcsError| err(e.to_string()))?),
                None => (rest, Criterion::Med),
            };
            return Ok(Reduction::Ics {
                pair: pair.parse().map_err(|e: IcsError| err(e.to_string()))?,
                criterion,
            });
        }
        Err(err("expected `none`, `pca:…` or `ics:…`".into()))
    }
}

/// Components retained by a reduction.
#[derive(Debug, Clone)]
pub enum Reduced<T> {
    /// Standardized input data.
    Standardized,
    Pca(PcaResult<T>),
    Ics(IcsResult<T>),
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome<T> {
    /// 0-based indices of the retained components (all columns for `none`).
    pub selected: Vec<usize>,
    /// Data handed to the clusterer.
    pub components: Matrix<T>,
    pub reduced: Reduced<T>,
    pub clustering: ClusterResult<T>,
    /// Discriminatory power of `components` with respect to the true labels.
    pub eta2: Option<f64>,
    pub ari: Option<f64>,
}

/// Reduces `x`, selects components and returns them with the selection.
pub fn reduce<T: Scalar>(
    x: &Matrix<T>,
    labels: Option<&[usize]>,
    reduction: &Reduction,
    standardize_robust: bool,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, Matrix<T>, Reduced<T>)> {
    match reduction {
        Reduction::None => {
            let z = standardize(x, standardize_robust)?;
            Ok(((0..x.cols()).collect(), z, Reduced::Standardized))
        }
        Reduction::Pca { scatter, rule } => {
            let est = scatter.estimate(x, seed)?;
            let p = pca(x, &est)?;
            let idx = p.select(*rule, k)?;
            let comps = p.scores.select_columns(&idx);
            Ok((idx, comps, Reduced::Pca(p)))
        }
        Reduction::Ics { pair, criterion } => {
            let r = pair.fit(x, seed)?;
            let sel = select(*criterion, &r, k, labels)?;
            if sel.indices.is_empty() {
                return Err(IcsError::EmptySelection);
            }
            let comps = r.project(&sel.indices)?;
            Ok((sel.indices, comps, Reduced::Ics(r)))
        }
    }
}

/// Full tandem pipeline. Metrics are computed when `labels` are given; the
/// oracle criterion requires them.
pub fn run_pipeline<T: Scalar>(
    x: &Matrix<T>,
    labels: Option<&[usize]>,
    reduction: &Reduction,
    clusterer: ClusterMethod,
    k: usize,
    seed: u64,
) -> Result<PipelineOutcome<T>> {
    if k < 2 {
        return crate::error::validation(format!("the pipeline needs k ≥ 2, got {k}"));
    }
    if let Some(l) = labels {
        if l.len() != x.rows() {
            return crate::error::validation(format!("{} labels for {} rows", l.len(), x.rows()));
        }
    }
    let (selected, components, reduced) =
        reduce(x, labels, reduction, clusterer.wants_robust_standardization(), k, seed)?;
    let clustering = clusterer.run(&components, k, rng::derive_seed(seed, &["cluster"]))?;
    let (eta2, ari) = match labels {
        Some(l) => (
            Some(eta2(&components, l)?.as_f64()),
            Some(ari(&clustering.labels, l)?),
        ),
        None => (None, None),
    };
    Ok(PipelineOutcome {
        selected,
        components,
        reduced,
        clustering,
        eta2,
        ari,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{gen_mixture, MixtureSpec};

    #[test]
    fn reduction_grammar() {
        for s in ["none", "pca:cov:pct80", "pca:rmcd:0.75:kminus1", "ics:tcov:2,cov/med", "ics:cov,cov4/normal:0.05", "ics:lcov:cov:0.1,cov/oracle"] {
            let r: Reduction = s.parse().unwrap();
            assert_eq!(r.to_string().parse::<Reduction>().unwrap(), r, "{s}");
        }
        assert_eq!(
            "ics:tcov:2,cov".parse::<Reduction>().unwrap(),
            "ics:tcov:2,cov/med".parse::<Reduction>().unwrap()
        );
        for bad in ["pca", "pca:cov", "ics:cov", "ics:cov,cov4/bogus", "tsne"] {
            assert!(bad.parse::<Reduction>().is_err(), "{bad}");
        }
    }

    #[test]
    fn oracle_needs_labels() {
        let spec = MixtureSpec::new(4, 200, &[50.0, 50.0], 10.0).unwrap();
        let (x, truth) = gen_mixture::<f64>(&spec, 1);
        let red: Reduction = "ics:cov,cov4/oracle".parse().unwrap();
        assert!(matches!(
            run_pipeline(&x, None, &red, ClusterMethod::Kmeans, 2, 0),
            Err(IcsError::Validation(_))
        ));
        let out = run_pipeline(&x, Some(&truth), &red, ClusterMethod::Kmeans, 2, 0).unwrap();
        assert_eq!(out.selected.len(), 1);
        assert!(out.ari.unwrap() > 0.95);
    }

    #[test]
    fn none_standardizes_per_method() {
        let spec = MixtureSpec::new(3, 200, &[50.0, 50.0], 10.0).unwrap();
        let (x, truth) = gen_mixture::<f64>(&spec, 2);
        let out = run_pipeline(&x, Some(&truth), &Reduction::None, ClusterMethod::Kmeans, 2, 0).unwrap();
        assert_eq!(out.selected, vec![0, 1, 2]);
        assert_eq!(out.components, standardize(&x, false).unwrap());
        let out = run_pipeline(&x, Some(&truth), &Reduction::None, ClusterMethod::Pam, 2, 0).unwrap();
        assert_eq!(out.components, standardize(&x, true).unwrap());
        assert!(out.eta2.unwrap() > 0.9);
    }

    #[test]
    fn pca_reduction_uses_scores() {
        let spec = MixtureSpec::new(5, 300, &[50.0, 30.0, 20.0], 10.0).unwrap();
        let (x, truth) = gen_mixture::<f64>(&spec, 3);
        let red: Reduction = "pca:cov:kminus1".parse().unwrap();
        let out = run_pipeline(&x, Some(&truth), &red, ClusterMethod::Kmeans, 3, 0).unwrap();
        assert_eq!(out.selected, vec![0, 1]);
        assert_eq!(out.components.cols(), 2);
    }

    #[test]
    fn empty_selection_is_reported() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let x: Matrix<f64> = Matrix::from_fn(300, 3, |_, _| StandardNormal.sample(&mut rng));
        let red: Reduction = "ics:cov,cov4/normal:0.0001".parse().unwrap();
        assert_eq!(
            run_pipeline(&x, None, &red, ClusterMethod::Kmeans, 2, 0).unwrap_err(),
            IcsError::EmptySelection
        );
    }
}
