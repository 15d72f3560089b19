//! Simulated data: mean-shift Gaussian mixtures, hyperrectangle outliers and
//! the barrow wheel.
//!
//! Generators draw in `f64` and cast, so a seed produces the same sample for
//! every scalar type up to rounding.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};

use crate::error::{validation, IcsError, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::scalar::Scalar;

/// Label given to injected outliers.
pub const OUTLIER: usize = 0;

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub d: usize,
    pub n: usize,
    /// Mixture weights ε₁..ε_q, normalized to sum to one.
    pub weights: Vec<f64>,
    pub delta: f64,
}

impl MixtureSpec {
    /// Weights may be given in any positive scale (e.g. percentages) and are normalized.
    pub fn new(d: usize, n: usize, weights: &[f64], delta: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return validation("mixture weights must be positive and finite");
        }
        if d == 0 || n < 2 {
            return validation(format!("mixture needs d ≥ 1 and n ≥ 2, got d={d}, n={n}"));
        }
        if weights.len() > d + 1 {
            return validation(format!("{} groups need more than {d} shift directions", weights.len()));
        }
        if !delta.is_finite() {
            return validation("mean shift must be finite");
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            d,
            n,
            weights: weights.iter().map(|w| w / total).collect(),
            delta,
        })
    }

    pub fn q(&self) -> usize {
        self.weights.len()
    }
}

/// Rows from N(μ_h, I) with μ₁ = 0 and μ_{h+1} = δ·e_h; labels are h ∈ 1..q.
pub fn gen_mixture<T: Scalar>(spec: &MixtureSpec, seed: u64) -> (Matrix<T>, Vec<usize>) {
    let mut r = rng::stream(seed, 0);
    let pick = rand::distr::weighted::WeightedIndex::new(&spec.weights).expect("weights validated");
    let mut labels = Vec::with_capacity(spec.n);
    let mut x = Matrix::<f64>::zeros(spec.n, spec.d);
    for i in 0..spec.n {
        let h = pick.sample(&mut r);
        labels.push(h + 1);
        for v in x.row_mut(i).iter_mut() {
            *v = StandardNormal.sample(&mut r);
        }
        if h > 0 {
            x[(i, h - 1)] += spec.delta;
        }
    }
    (x.cast(), labels)
}

/// Replaces ⌈proportion·n⌉ uniformly chosen rows by draws from the box of
/// twice the per-variable data range, excluding the data-range box itself.
/// Replaced rows are labelled [`OUTLIER`].
pub fn inject_outliers<T: Scalar>(
    x: &Matrix<T>,
    labels: &[usize],
    proportion: f64,
    seed: u64,
) -> Result<(Matrix<T>, Vec<usize>)> {
    if !(0.0..1.0).contains(&proportion) {
        return validation(format!("outlier proportion must lie in [0, 1), got {proportion}"));
    }
    let (n, d) = x.shape();
    if labels.len() != n {
        return validation(format!("{} labels for {n} rows", labels.len()));
    }
    let m = (proportion * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut out = x.clone();
    let mut out_labels = labels.to_vec();
    if m == 0 {
        return Ok((out, out_labels));
    }
    let mut mid = Vec::with_capacity(d);
    let mut half = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.column(j);
        let lo = col.iter().map(|v| v.as_f64()).fold(f64::INFINITY, f64::min);
        let hi = col.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        mid.push(0.5 * (lo + hi));
        half.push(0.5 * (hi - lo));
    }
    if half.iter().all(|&h| h == 0.0) {
        return Err(IcsError::Numeric("data range is zero in every variable".into()));
    }
    let mut r = rng::stream(seed, 0);
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds");
    let mut rows = sample(&mut r, n, m).into_vec();
    rows.sort_unstable();
    let mut point = vec![0.0; d];
    for i in rows {
        let mut draws = 0;
        loop {
            draws += 1;
            if draws > MAX_REJECTIONS {
                return Err(IcsError::Numeric("outlier rejection sampling did not terminate".into()));
            }
            for (j, p) in point.iter_mut().enumerate() {
                *p = mid[j] + 2.0 * half[j] * unit.sample(&mut r);
            }
            if point.iter().enumerate().any(|(j, &p)| (p - mid[j]).abs() > half[j]) {
                break;
            }
        }
        for (dst, &p) in out.row_mut(i).iter_mut().zip(&point) {
            *dst = T::lit(p);
        }
        out_labels[i] = OUTLIER;
    }
    Ok((out, out_labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrowWheelSpec {
    pub d: usize,
    pub n: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub eps: f64,
    /// Orthogonal d×d map applied to every row.
    pub rotation: Matrix<f64>,
}

impl BarrowWheelSpec {
    /// Uses [`householder_rotation`] as the rotation.
    pub fn new(d: usize, n: usize, sigma1: f64, sigma2: f64, eps: f64) -> Result<Self> {
        if d < 2 {
            return validation(format!("barrow wheel needs d ≥ 2, got {d}"));
        }
        Self::with_rotation(n, sigma1, sigma2, eps, householder_rotation(d))
    }

    pub fn with_rotation(n: usize, sigma1: f64, sigma2: f64, eps: f64, rotation: Matrix<f64>) -> Result<Self> {
        let d = rotation.rows();
        if rotation.cols() != d || d < 2 {
            return validation("rotation must be square of size at least 2");
        }
        let gram = rotation.matmul_t(&rotation)?;
        if gram.sub(&Matrix::identity(d)).max_abs() > 1e-10 {
            return validation("rotation is not orthogonal");
        }
        if !(sigma1 > 0.0 && sigma2 > 0.0) || !sigma1.is_finite() || !sigma2.is_finite() {
            return validation("barrow wheel scales must be positive");
        }
        if !(0.0..1.0).contains(&eps) {
            return validation(format!("barrow wheel ε must lie in [0, 1), got {eps}"));
        }
        if n < 2 {
            return validation("barrow wheel needs n ≥ 2");
        }
        Ok(Self {
            d,
            n,
            sigma1,
            sigma2,
            eps,
            rotation,
        })
    }
}

/// Householder reflection `I − 2vvᵀ/vᵀv` with `v = e₁ − 1/√d`, which maps e₁ to (1,…,1)/√d.
pub fn householder_rotation(d: usize) -> Matrix<f64> {
    let u = 1.0 / (d as f64).sqrt();
    let mut v = vec![-u; d];
    v[0] += 1.0;
    let vv: f64 = v.iter().map(|a| a * a).sum();
    Matrix::from_fn(d, d, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        if vv == 0.0 {
            id
        } else {
            id - 2.0 * v[i] * v[j] / vv
        }
    })
}

/// Barrow-wheel sample. The body N(0, diag(σ₁², 1, …, 1)) is label 1; spoke
/// rows (s·h₁, h₂) with h₁ ~ χ_{d−1} are label 2 when s = +1 and 3 when s = −1.
pub fn gen_barrow_wheel<T: Scalar>(spec: &BarrowWheelSpec, seed: u64) -> (Matrix<T>, Vec<usize>) {
    let d = spec.d;
    let mut r = rng::stream(seed, 0);
    let chi2 = ChiSquared::new((d - 1) as f64).expect("d ≥ 2");
    let mut raw = Matrix::<f64>::zeros(spec.n, d);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let row = raw.row_mut(i);
        if r.random::<f64>() < spec.eps {
            let h1: f64 = chi2.sample(&mut r).sqrt();
            let positive = r.random::<bool>();
            row[0] = if positive { h1 } else { -h1 };
            for v in row[1..].iter_mut() {
                let z: f64 = StandardNormal.sample(&mut r);
                *v = spec.sigma2 * z;
            }
            labels.push(if positive { 2 } else { 3 });
        } else {
            for (j, v) in row.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut r);
                *v = if j == 0 { spec.sigma1 * z } else { z };
            }
            labels.push(1);
        }
    }
    let x = raw.matmul_t(&spec.rotation).expect("conformable");
    (x.cast(), labels)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `parts` keeps the weights as written, for display.
    Mixture { spec: MixtureSpec, parts: Vec<f64> },
    BarrowWheel(BarrowWheelSpec),
}

/// A simulation setting: a generator plus optional outlier contamination.
///
/// Grammar: `mix:<d>:<w1>-<w2>-…:delta<δ>[:n<n>]` or
/// `bwheel:d<d>:s1=<σ₁>:s2=<σ₂>:eps=<ε>[:n<n>]`, optionally followed by
/// `+outliers:<proportion>`. The default n is 1000.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub generator: Generator,
    pub outliers: Option<f64>,
}

impl Setting {
    pub const DEFAULT_N: usize = 1000;

    /// Number of clusters the generator produces.
    pub fn k(&self) -> usize {
        match &self.generator {
            Generator::Mixture { spec, .. } => spec.q(),
            Generator::BarrowWheel(_) => 3,
        }
    }

    pub fn n(&self) -> usize {
        match &self.generator {
            Generator::Mixture { spec, .. } => spec.n,
            Generator::BarrowWheel(spec) => spec.n,
        }
    }

    /// Sample and ground-truth labels; outliers are seeded from a seed derived from `seed`.
    pub fn generate<T: Scalar>(&self, seed: u64) -> Result<(Matrix<T>, Vec<usize>)> {
        let (x, labels) = match &self.generator {
            Generator::Mixture { spec, .. } => gen_mixture(spec, seed),
            Generator::BarrowWheel(spec) => gen_barrow_wheel(spec, seed),
        };
        match self.outliers {
            Some(p) => inject_outliers(&x, &labels, p, rng::derive_seed(seed, &["outliers"])),
            None => Ok((x, labels)),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.generator {
            Generator::Mixture { spec, parts } => {
                let w: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "mix:{}:{}:delta{}:n{}", spec.d, w.join("-"), spec.delta, spec.n)?;
            }
            Generator::BarrowWheel(s) => {
                write!(f, "bwheel:d{}:s1={}:s2={}:eps={}:n{}", s.d, s.sigma1, s.sigma2, s.eps, s.n)?;
            }
        }
        if let Some(p) = self.outliers {
            write!(f, "+outliers:{p}")?;
        }
        Ok(())
    }
}

fn spec_err(spec: &str, message: impl Into<String>) -> IcsError {
    IcsError::Spec {
        spec: spec.to_string(),
        message: message.into(),
    }
}

fn num<V: FromStr>(spec: &str, text: &str, what: &str) -> Result<V> {
    text.parse()
        .map_err(|_| spec_err(spec, format!("cannot read {what} from `{text}`")))
}

fn parse_mixture(s: &str, fields: &[&str]) -> Result<Generator> {
    if !(3..=4).contains(&fields.len()) {
        return Err(spec_err(s, "expected mix:<d>:<weights>:delta<δ>[:n<n>]"));
    }
    let d: usize = num(s, fields[0], "dimension")?;
    let parts = fields[1]
        .split('-')
        .map(|w| num::<f64>(s, w, "weight"))
        .collect::<Result<Vec<_>>>()?;
    let delta: f64 = match fields[2].strip_prefix("delta") {
        Some(v) => num(s, v, "delta")?,
        None => return Err(spec_err(s, "third field must be delta<δ>")),
    };
    let n = match fields.get(3) {
        Some(f) => match f.strip_prefix('n') {
            Some(v) => num(s, v, "sample size")?,
            None => return Err(spec_err(s, "fourth field must be n<n>")),
        },
        None => Setting::DEFAULT_N,
    };
    let spec = MixtureSpec::new(d, n, &parts, delta).map_err(|e| spec_err(s, e.to_string()))?;
    Ok(Generator::Mixture { spec, parts })
}

fn parse_bwheel(s: &str, fields: &[&str]) -> Result<Generator> {
    let mut d = None;
    let (mut s1, mut s2, mut eps, mut n) = (None, None, None, Setting::DEFAULT_N);
    for f in fields {
        if let Some((key, value)) = f.split_once('=') {
            match key {
                "s1" => s1 = Some(num(s, value, "σ₁")?),
                "s2" => s2 = Some(num(s, value, "σ₂")?),
                "eps" => eps = Some(num(s, value, "ε")?),
                _ => return Err(spec_err(s, format!("unknown key `{key}`"))),
            }
        } else if let Some(v) = f.strip_prefix('d') {
            d = Some(num(s, v, "dimension")?);
        } else if let Some(v) = f.strip_prefix('n') {
            n = num(s, v, "sample size")?;
        } else {
            return Err(spec_err(s, format!("unexpected field `{f}`")));
        }
    }
    match (d, s1, s2, eps) {
        (Some(d), Some(s1), Some(s2), Some(eps)) => Ok(Generator::BarrowWheel(
            BarrowWheelSpec::new(d, n, s1, s2, eps).map_err(|e| spec_err(s, e.to_string()))?,
        )),
        _ => Err(spec_err(s, "expected bwheel:d<d>:s1=<σ₁>:s2=<σ₂>:eps=<ε>[:n<n>]")),
    }
}

impl FromStr for Setting {
    type Err = IcsError;

    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim().to_ascii_lowercase();
        let (base, extra) = match text.split_once('+') {
            Some((b, e)) => (b, Some(e)),
            None => (text.as_str(), None),
        };
        let fields: Vec<&str> = base.split(':').collect();
        let generator = match fields[0] {
            "mix" => parse_mixture(s, &fields[1..])?,
            "bwheel" => parse_bwheel(s, &fields[1..])?,
            _ => return Err(spec_err(s, "unknown generator, expected `mix` or `bwheel`")),
        };
        let outliers = match extra {
            None => None,
            Some(e) => match e.split_once(':') {
                Some(("outliers", p)) => {
                    let p: f64 = num(s, p, "outlier proportion")?;
                    if !(0.0..1.0).contains(&p) {
                        return Err(spec_err(s, "outlier proportion must lie in [0, 1)"));
                    }
                    Some(p)
                }
                _ => return Err(spec_err(s, "expected +outliers:<proportion>")),
            },
        };
        Ok(Setting { generator, outliers })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ics::ScatterPair;
    use crate::matstat::sym_eigen;
    use crate::scatter::cov;

    #[test]
    fn group_mean_difference() {
        let spec = MixtureSpec::new(10, 1000, &[0.85, 0.15], 10.0).unwrap();
        for seed in 0..5 {
            let (x, labels) = gen_mixture::<f64>(&spec, seed);
            let rows = |g| (0..1000).filter(|&i| labels[i] == g).collect::<Vec<_>>();
            let m1 = x.select_rows(&rows(1)).col_means();
            let m2 = x.select_rows(&rows(2)).col_means();
            let diff = m2[0] - m1[0];
            assert!((9.7..=10.3).contains(&diff), "{diff}");
            assert!((1..10).all(|j| (m2[j] - m1[j]).abs() < 0.5));
        }
    }

    #[test]
    fn group_covariances_near_identity() {
        let spec = MixtureSpec::new(10, 10_000, &[50.0, 50.0], 10.0).unwrap();
        let (x, labels) = gen_mixture::<f64>(&spec, 3);
        for g in 1..=2 {
            let rows: Vec<usize> = (0..10_000).filter(|&i| labels[i] == g).collect();
            let c = cov(&x.select_rows(&rows)).unwrap().matrix.sub(&Matrix::identity(10));
            let e = sym_eigen(&c).unwrap().values;
            assert!(e[0].abs().max(e[9].abs()) < 0.2, "{e:?}");
        }
    }

    #[test]
    fn zero_shift_is_gaussian() {
        let spec = MixtureSpec::new(5, 2000, &[50.0, 50.0], 0.0).unwrap();
        let (x, _) = gen_mixture::<f64>(&spec, 1);
        let r = "cov,cov4".parse::<ScatterPair>().unwrap().fit(&x, 0).unwrap();
        assert!(r.eigenvalues.iter().all(|&l| (0.8..1.2).contains(&l)), "{:?}", r.eigenvalues);
    }

    #[test]
    fn weights_are_normalized() {
        let spec = MixtureSpec::new(10, 10, &[33.0, 33.0, 33.0], 10.0).unwrap();
        assert!((spec.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(MixtureSpec::new(10, 10, &[50.0, 0.0], 10.0).is_err());
        assert!(MixtureSpec::new(2, 10, &[1.0; 4], 10.0).is_err());
    }

    #[test]
    fn outliers_respect_boxes() {
        let spec = MixtureSpec::new(3, 1000, &[70.0, 30.0], 10.0).unwrap();
        let (x, labels) = gen_mixture::<f64>(&spec, 2);
        let (y, l2) = inject_outliers(&x, &labels, 0.02, 9).unwrap();
        assert_eq!(l2.iter().filter(|&&l| l == OUTLIER).count(), 20);
        for j in 0..3 {
            let col = x.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
            for i in (0..1000).filter(|&i| l2[i] == OUTLIER) {
                assert!((y[(i, j)] - mid).abs() <= 2.0 * half);
            }
        }
        for i in 0..1000 {
            if l2[i] == OUTLIER {
                let outside = (0..3).any(|j| {
                    let col = x.column(j);
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    y[(i, j)] < lo || y[(i, j)] > hi
                });
                assert!(outside);
            } else {
                assert_eq!(y.row(i), x.row(i));
                assert_eq!(l2[i], labels[i]);
            }
        }
        let (z, l3) = inject_outliers(&x, &labels, 0.0, 9).unwrap();
        assert_eq!(z, x);
        assert_eq!(l3, labels);
    }

    #[test]
    fn householder_is_orthogonal() {
        for d in 2..6 {
            let h = householder_rotation(d);
            assert!(h.matmul_t(&h).unwrap().sub(&Matrix::identity(d)).max_abs() < 1e-12);
            let e1: Vec<f64> = h.column(0);
            assert!(e1.iter().all(|&v| (v - 1.0 / (d as f64).sqrt()).abs() < 1e-12));
        }
    }

    #[test]
    fn barrow_wheel_proportions() {
        let spec = BarrowWheelSpec::new(3, 1000, 0.1, 0.2, 0.2).unwrap();
        let mut props = [0.0f64; 3];
        for seed in 0..20 {
            let (_, labels) = gen_barrow_wheel::<f64>(&spec, seed);
            for l in labels {
                props[l - 1] += 1.0 / 20_000.0;
            }
        }
        for (p, e) in props.iter().zip([0.8, 0.1, 0.1]) {
            assert!((p - e).abs() < 0.03, "{props:?}");
        }
        let pure = BarrowWheelSpec::new(3, 200, 0.1, 0.2, 0.0).unwrap();
        assert!(gen_barrow_wheel::<f64>(&pure, 0).1.iter().all(|&l| l == 1));
    }

    #[test]
    fn barrow_wheel_spokes_follow_the_rotated_axis() {
        let spec = BarrowWheelSpec::new(3, 1000, 0.1, 0.2, 0.2).unwrap();
        let (x, labels) = gen_barrow_wheel::<f64>(&spec, 4);
        let axis = 1.0 / 3f64.sqrt();
        for i in 0..1000 {
            let proj: f64 = x.row(i).iter().map(|v| v * axis).sum();
            match labels[i] {
                2 => assert!(proj > 0.0),
                3 => assert!(proj < 0.0),
                _ => {}
            }
        }
    }

    #[test]
    fn setting_grammar() {
        for s in [
            "mix:10:50-50:delta10:n1000",
            "mix:10:10-10-20-20-40:delta10:n500+outliers:0.05",
            "bwheel:d3:s1=0.1:s2=0.2:eps=0.2:n1000",
        ] {
            assert_eq!(s.parse::<Setting>().unwrap().to_string(), s);
        }
        let s: Setting = "mix:10:50-50:delta10+outliers:0.02".parse().unwrap();
        assert_eq!(s.n(), 1000);
        assert_eq!(s.k(), 2);
        assert_eq!("bwheel:d3:s1=0.1:s2=0.2:eps=0.2".parse::<Setting>().unwrap().k(), 3);
        for bad in ["mix:10:50-50", "mix:x:50-50:delta10", "norm:3", "bwheel:d3:s1=0.1", "mix:10:50-50:delta10+outliers:1.5"] {
            assert!(bad.parse::<Setting>().is_err(), "{bad}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s: Setting = "mix:10:70-30:delta10:n300+outliers:0.05".parse().unwrap();
        let a = s.generate::<f64>(11).unwrap();
        assert_eq!(a, s.generate::<f64>(11).unwrap());
        assert_ne!(a.0, s.generate::<f64>(12).unwrap().0);
        let b = s.generate::<f32>(11).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.1.iter().filter(|&&l| l == OUTLIER).count(), 15);
    }
}
