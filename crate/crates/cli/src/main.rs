//! `tandem-ics` command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (arguments, specs, CSV or
//! config errors), 2 when the computation itself fails (for `experiment`:
//! when every cell fails).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tandem_ics::csvio::{numbered_columns, read_csv, write_csv_to};
use tandem_ics::experiment::{summarize, summary_path, write_records, write_summary};
use tandem_ics::{
    ari, eta2, pca, run_experiment, run_pipeline, select, ClusterMethod, Criterion, Dataset, EstimatorId,
    ExperimentConfig, IcsError, PcaRule, Reduction, ScatterPair, Setting,
};

#[derive(Parser, Debug)]
#[command(name = "tandem-ics", version, about = "Tandem clustering with invariant coordinate selection")]
struct Cli {
    /// Random seed (for `experiment`, overrides `base_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file (default: standard output).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Input {
    /// CSV file with a header row.
    input: PathBuf,

    /// Column holding the true group labels.
    #[arg(long)]
    label: Option<String>,

    /// Log-transform every numeric column before use.
    #[arg(long)]
    log: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a data set, e.g. `mix:10:50-50:delta10+outliers:0.05` or `bwheel:d3:s1=0.1:s2=0.2:eps=0.2`.
    Simulate { setting: String },

    /// Invariant coordinates of a data set; eigenvalues go to standard error.
    Ics {
        #[command(flatten)]
        data: Input,
        /// Scatter pair `v1,v2`, e.g. `tcov:2,cov`.
        #[arg(long, default_value = "tcov:2,cov")]
        pair: String,
    },

    /// Principal component scores; eigenvalues and the retained set go to standard error.
    Pca {
        #[command(flatten)]
        data: Input,
        /// Scatter estimator, e.g. `cov` or `rmcd:0.75`.
        #[arg(long, default_value = "cov")]
        scatter: String,
        /// Retention rule: `pct80` or `kminus1`.
        #[arg(long, default_value = "pct80")]
        rule: String,
        #[arg(long, short)]
        k: Option<usize>,
    },

    /// Select invariant coordinates.
    Select {
        #[command(flatten)]
        data: Input,
        #[arg(long, default_value = "tcov:2,cov")]
        pair: String,
        /// `med`, `var`, `normal:<level>` or `oracle`.
        #[arg(long, default_value = "med")]
        criterion: String,
        #[arg(long, short)]
        k: Option<usize>,
    },

    /// Cluster the numeric columns as they are.
    Cluster {
        #[command(flatten)]
        data: Input,
        /// `kmeans`, `pam`, `tkmeans:<trim>`, `gmm` or `gmm-noise`.
        #[arg(long, default_value = "kmeans")]
        method: String,
        #[arg(long, short)]
        k: usize,
    },

    /// η² of the numeric columns and, given a partition, its ARI.
    Evaluate {
        #[command(flatten)]
        data: Input,
        /// CSV with a `cluster` column, as written by `cluster` or `run`.
        #[arg(long)]
        clusters: Option<PathBuf>,
    },

    /// Reduce, select, cluster and evaluate.
    Run {
        #[command(flatten)]
        data: Input,
        /// `none`, `pca:<estimator>:<rule>` or `ics:<v1>,<v2>[/<criterion>]`.
        #[arg(long, default_value = "ics:tcov:2,cov/med")]
        reduction: String,
        #[arg(long, default_value = "kmeans")]
        method: String,
        #[arg(long, short)]
        k: usize,
    },

    /// Run a simulation grid described by a TOML file.
    Experiment { config: PathBuf },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<IcsError> for Failure {
    fn from(e: IcsError) -> Self {
        match e {
            IcsError::Validation(_) | IcsError::Parse { .. } | IcsError::Spec { .. } | IcsError::Io(_) => {
                Failure::Invalid(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    let seed = cli.seed.unwrap_or(1);
    let out = cli.output.as_deref();
    match cli.command {
        Command::Simulate { setting } => simulate(&setting, seed, out),
        Command::Ics { data, pair } => ics_cmd(&data, &pair, seed, out),
        Command::Pca { data, scatter, rule, k } => pca_cmd(&data, &scatter, &rule, k, seed, out),
        Command::Select { data, pair, criterion, k } => select_cmd(&data, &pair, &criterion, k, seed, out),
        Command::Cluster { data, method, k } => cluster_cmd(&data, &method, k, seed, out),
        Command::Evaluate { data, clusters } => evaluate_cmd(&data, clusters.as_deref(), out),
        Command::Run { data, reduction, method, k } => run_cmd(&data, &reduction, &method, k, seed, out),
        Command::Experiment { config } => experiment_cmd(&config, cli.seed, cli.threads, out),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(input: &Input) -> Result<Dataset, Failure> {
    let mut d: Dataset = read_csv(&input.input, input.label.as_deref())?;
    if input.log {
        if let Some(v) = d.x.as_slice().iter().find(|v| **v <= 0.0) {
            return Err(Failure::Invalid(format!("--log needs positive values, found {v}")));
        }
        d.x = d.x.map(f64::ln);
    }
    Ok(d)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

fn one_based(v: &[usize]) -> String {
    v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn need_k(k: Option<usize>, what: &str) -> Result<usize, Failure> {
    k.ok_or_else(|| Failure::Invalid(format!("{what} needs --k")))
}

fn write_partition(out: Option<&Path>, labels: &[usize]) -> Outcome {
    let mut w = sink(out)?;
    writeln!(w, "row,cluster")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(w, "{},{l}", i + 1)?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(setting: &str, seed: u64, out: Option<&Path>) -> Outcome {
    let setting: Setting = setting.parse()?;
    let (x, labels) = setting.generate::<f64>(seed)?;
    let mut w = sink(out)?;
    write_csv_to(&mut w, &numbered_columns("x", x.cols()), &x, Some(&labels))?;
    w.flush()?;
    Ok(())
}

fn ics_cmd(data: &Input, pair: &str, seed: u64, out: Option<&Path>) -> Outcome {
    let d = load(data)?;
    let pair: ScatterPair = pair.parse()?;
    let r = pair.fit(&d.x, seed)?;
    eprintln!("pair: {}", r.pair);
    eprintln!("eigenvalues: {}", join(&r.eigenvalues));
    let mut w = sink(out)?;
    write_csv_to(&mut w, &numbered_columns("IC", r.dim()), &r.scores, d.labels.as_deref())?;
    w.flush()?;
    Ok(())
}

fn pca_cmd(data: &Input, scatter: &str, rule: &str, k: Option<usize>, seed: u64, out: Option<&Path>) -> Outcome {
    let d = load(data)?;
    let est: EstimatorId = scatter.parse()?;
    let rule: PcaRule = rule.parse()?;
    let k = match rule {
        PcaRule::KMinus1 => need_k(k, "the kminus1 rule")?,
        PcaRule::Pct(_) => k.unwrap_or(2),
    };
    let p = pca(&d.x, &est.estimate(&d.x, seed)?)?;
    let kept = p.select(rule, k)?;
    eprintln!("eigenvalues: {}", join(&p.eigenvalues));
    eprintln!("retained: {}", one_based(&kept));
    let mut w = sink(out)?;
    write_csv_to(&mut w, &numbered_columns("PC", p.eigenvalues.len()), &p.scores, d.labels.as_deref())?;
    w.flush()?;
    Ok(())
}

fn select_cmd(data: &Input, pair: &str, criterion: &str, k: Option<usize>, seed: u64, out: Option<&Path>) -> Outcome {
    let d = load(data)?;
    let pair: ScatterPair = pair.parse()?;
    let criterion: Criterion = criterion.parse()?;
    let k = match criterion {
        Criterion::Normal { .. } => k.unwrap_or(2),
        _ => need_k(k, "this criterion")?,
    };
    let r = pair.fit(&d.x, seed)?;
    let s = select(criterion, &r, k, d.labels.as_deref())?;
    let mut w = sink(out)?;
    writeln!(w, "pair: {}", r.pair)?;
    writeln!(w, "criterion: {}", s.criterion)?;
    writeln!(w, "eigenvalues: {}", join(&r.eigenvalues))?;
    writeln!(w, "diagnostics: {}", join(&s.diagnostics))?;
    writeln!(w, "selected: {}", one_based(&s.indices))?;
    w.flush()?;
    Ok(())
}

fn cluster_cmd(data: &Input, method: &str, k: usize, seed: u64, out: Option<&Path>) -> Outcome {
    let d = load(data)?;
    let method: ClusterMethod = method.parse()?;
    let fit = method.run(&d.x, k, seed)?;
    eprintln!("method: {} objective: {} iterations: {} converged: {}", fit.method, fit.objective, fit.iterations, fit.converged);
    if let Some(truth) = &d.labels {
        eprintln!("ari: {:.6}", ari(&fit.labels, truth)?);
    }
    write_partition(out, &fit.labels)
}

fn evaluate_cmd(data: &Input, clusters: Option<&Path>, out: Option<&Path>) -> Outcome {
    let d = load(data)?;
    let truth = d
        .labels
        .as_deref()
        .ok_or_else(|| Failure::Invalid("evaluate needs --label".into()))?;
    let mut w = sink(out)?;
    writeln!(w, "eta2: {:.6}", eta2(&d.x, truth)?)?;
    if let Some(path) = clusters {
        let part: Dataset = read_csv(path, Some("cluster"))?;
        let assigned = part.labels.expect("label column requested");
        writeln!(w, "ari: {:.6}", ari(&assigned, truth)?)?;
    }
    w.flush()?;
    Ok(())
}

fn run_cmd(data: &Input, reduction: &str, method: &str, k: usize, seed: u64, out: Option<&Path>) -> Outcome {
    let d = load(data)?;
    let reduction: Reduction = reduction.parse()?;
    let method: ClusterMethod = method.parse()?;
    let r = run_pipeline(&d.x, d.labels.as_deref(), &reduction, method, k, seed)?;
    eprintln!("reduction: {reduction}");
    eprintln!("selected: {}", one_based(&r.selected));
    eprintln!("method: {} objective: {}", r.clustering.method, r.clustering.objective);
    if let (Some(e), Some(a)) = (r.eta2, r.ari) {
        eprintln!("eta2: {e:.6}");
        eprintln!("ari: {a:.6}");
    }
    write_partition(out, &r.clustering.labels)
}

fn experiment_cmd(config: &Path, seed: Option<u64>, threads: Option<usize>, out: Option<&Path>) -> Outcome {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    if let Some(o) = out {
        cfg.output = Some(o.to_path_buf());
    }
    let records = run_experiment(&cfg)?;
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    let mut w = sink(cfg.output.as_deref())?;
    write_records(&mut w, &records)?;
    w.flush()?;
    drop(w);
    let summary = summarize(&records);
    match &cfg.output {
        Some(path) => {
            let file = File::create(summary_path(path))?;
            write_summary(BufWriter::new(file), &summary)?;
        }
        None => write_summary(io::stderr().lock(), &summary)?,
    }
    eprintln!("{} records, {failed} failed", records.len());
    if failed == records.len() {
        return Err(Failure::Runtime("every cell failed".into()));
    }
    Ok(())
}
