//! Seeded Monte Carlo grid over settings × reductions × clusterers × replicates.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::cluster::ClusterMethod;
use crate::error::{validation, IcsError, Result};
use crate::matrix::Matrix;
use crate::metrics::{ari, eta2};
use crate::pipeline::{reduce, Reduction};
use crate::rng;
use crate::simgen::Setting;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    settings: Vec<String>,
    methods: Vec<String>,
    clusterers: Vec<String>,
    replications: usize,
    base_seed: u64,
    output: Option<PathBuf>,
    threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub settings: Vec<Setting>,
    pub methods: Vec<Reduction>,
    pub clusterers: Vec<ClusterMethod>,
    pub replications: usize,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Parses a TOML document with the keys `settings`, `methods`,
    /// `clusterers`, `replications`, `base_seed` and optionally `output` and `threads`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| IcsError::Validation(format!("config: {e}")))?;
        let cfg = Self {
            settings: raw.settings.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            methods: raw.methods.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            clusterers: raw.clusterers.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            replications: raw.replications,
            base_seed: raw.base_seed,
            output: raw.output,
            threads: raw.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| IcsError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() || self.methods.is_empty() || self.clusterers.is_empty() {
            return validation("settings, methods and clusterers must be nonempty");
        }
        if self.replications == 0 {
            return validation("replications must be at least 1");
        }
        if self.threads == Some(0) {
            return validation("threads must be at least 1");
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.settings.len() * self.methods.len() * self.clusterers.len() * self.replications
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub setting: String,
    pub method: String,
    pub clusterer: String,
    pub replicate: usize,
    pub seed: u64,
    /// 0-based component indices.
    pub selected: Vec<usize>,
    pub eta2: Option<f64>,
    pub ari: Option<f64>,
    pub wall_ms: f64,
    pub failure: Option<String>,
}

/// Seed of replicate `replicate` of `setting`.
pub fn cell_seed(base: u64, setting: &Setting, replicate: usize) -> u64 {
    rng::derive_seed(base, &[&setting.to_string(), &replicate.to_string()])
}

fn failure_reason(e: &IcsError) -> String {
    match e {
        IcsError::EmptySelection => "empty-selection".into(),
        other => other.to_string(),
    }
}

/// All records sharing one data set and reduction.
fn run_group(cfg: &ExperimentConfig, s: usize, m: usize, rep: usize) -> Vec<ExperimentRecord> {
    let setting = &cfg.settings[s];
    let method = &cfg.methods[m];
    let seed = cell_seed(cfg.base_seed, setting, rep);
    let blank = |c: &ClusterMethod| ExperimentRecord {
        setting: setting.to_string(),
        method: method.to_string(),
        clusterer: c.to_string(),
        replicate: rep,
        seed,
        selected: Vec::new(),
        eta2: None,
        ari: None,
        wall_ms: 0.0,
        failure: None,
    };
    let data = setting.generate::<f64>(seed);
    let (x, truth) = match data {
        Ok(d) => d,
        Err(e) => {
            return cfg
                .clusterers
                .iter()
                .map(|c| ExperimentRecord {
                    failure: Some(failure_reason(&e)),
                    ..blank(c)
                })
                .collect()
        }
    };
    let k = setting.k();
    let reduce_seed = rng::derive_seed(seed, &["reduce"]);
    let mut shared: Option<(Result<(Vec<usize>, Matrix<f64>, f64)>, f64)> = None;
    let mut out = Vec::with_capacity(cfg.clusterers.len());
    for c in &cfg.clusterers {
        let mut rec = blank(c);
        let robust = c.wants_robust_standardization();
        // only the unreduced path depends on the clusterer
        let fresh = matches!(method, Reduction::None) || shared.is_none();
        if fresh {
            let t0 = Instant::now();
            let r = reduce(&x, Some(&truth), method, robust, k, reduce_seed)
                .and_then(|(sel, comps, _)| Ok((eta2(&comps, &truth)?, sel, comps)))
                .map(|(e, sel, comps)| (sel, comps, e));
            shared = Some((r, t0.elapsed().as_secs_f64() * 1e3));
        }
        let (reduced, reduce_ms) = shared.as_ref().expect("set above");
        rec.wall_ms = *reduce_ms;
        match reduced {
            Err(e) => rec.failure = Some(failure_reason(e)),
            Ok((sel, comps, e2)) => {
                rec.selected = sel.clone();
                rec.eta2 = Some(*e2);
                let t0 = Instant::now();
                match c.run(comps, k, rng::derive_seed(seed, &["cluster"])) {
                    Ok(fit) => match ari(&fit.labels, &truth) {
                        Ok(a) => rec.ari = Some(a),
                        Err(e) => rec.failure = Some(failure_reason(&e)),
                    },
                    Err(e) => rec.failure = Some(failure_reason(&e)),
                }
                rec.wall_ms += t0.elapsed().as_secs_f64() * 1e3;
            }
        }
        out.push(rec);
    }
    out
}

/// Runs the full grid. Records are ordered by setting, method, replicate and
/// clusterer, independent of the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let mut groups = Vec::new();
    for s in 0..cfg.settings.len() {
        for m in 0..cfg.methods.len() {
            for rep in 0..cfg.replications {
                groups.push((s, m, rep));
            }
        }
    }
    let run = || -> Vec<ExperimentRecord> {
        groups
            .par_iter()
            .map(|&(s, m, rep)| run_group(cfg, s, m, rep))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| IcsError::Validation(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_records<W: Write>(writer: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| IcsError::Io(e.to_string());
    w.write_record(["setting", "method", "clusterer", "replicate", "seed", "selected", "eta2", "ari", "wall_ms", "failure"])
        .map_err(io)?;
    for r in records {
        let sel: Vec<String> = r.selected.iter().map(|i| (i + 1).to_string()).collect();
        w.write_record([
            r.setting.clone(),
            r.method.clone(),
            r.clusterer.clone(),
            r.replicate.to_string(),
            r.seed.to_string(),
            sel.join(" "),
            opt(r.eta2),
            opt(r.ari),
            format!("{:.3}", r.wall_ms),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub setting: String,
    pub method: String,
    pub clusterer: String,
    pub runs: usize,
    pub failures: usize,
    /// (first quartile, median, third quartile) over successful runs.
    pub eta2: Option<(f64, f64, f64)>,
    pub ari: Option<(f64, f64, f64)>,
}

fn quartiles(mut v: Vec<f64>) -> Option<(f64, f64, f64)> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some((quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75)))
}

/// Per-cell quartiles of η² and ARI, in first-appearance order of the cells.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in records {
        let key = (r.setting.as_str(), r.method.as_str(), r.clusterer.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(s, m, c)| {
            let cell: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.setting == s && r.method == m && r.clusterer == c)
                .collect();
            SummaryRow {
                setting: s.into(),
                method: m.into(),
                clusterer: c.into(),
                runs: cell.len(),
                failures: cell.iter().filter(|r| r.failure.is_some()).count(),
                eta2: quartiles(cell.iter().filter_map(|r| r.eta2).collect()),
                ari: quartiles(cell.iter().filter_map(|r| r.ari).collect()),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| IcsError::Io(e.to_string());
    w.write_record([
        "setting", "method", "clusterer", "runs", "failures", "eta2_q1", "eta2_median", "eta2_q3", "ari_q1", "ari_median",
        "ari_q3",
    ])
    .map_err(io)?;
    for r in rows {
        let q = |v: Option<(f64, f64, f64)>| match v {
            Some((a, b, c)) => [a.to_string(), b.to_string(), c.to_string()],
            None => Default::default(),
        };
        let mut rec = vec![r.setting.clone(), r.method.clone(), r.clusterer.clone(), r.runs.to_string(), r.failures.to_string()];
        rec.extend(q(r.eta2));
        rec.extend(q(r.ari));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `<dir>/<stem>.summary.csv` next to a records file.
pub fn summary_path(records: &Path) -> PathBuf {
    let stem = records.file_stem().and_then(|s| s.to_str()).unwrap_or("records");
    records.with_file_name(format!("{stem}.summary.csv"))
}
