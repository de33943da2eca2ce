//! Command-line surface: `score`, `pairwise`, `correlate`, `zscore`, `synth`.
//!
//! Results go to `--out` (written atomically) or to stdout. Exit status is 0 on
//! success, 1 on usage or input errors, 2 on internal or output failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    all_metric_pairs, correlation_report, pairwise_scores, parse_metric_list, score_pair, zscore_by_metric, FamilyMap,
    Metric, MetricPair, PairwiseScoreTable, ScoreOptions, ScoreRow, SystemInput,
};
use crate::divergence::{cles, LogBase, SmoothingPrior, DEFAULT_ALPHA};
use crate::domain::LabelVocabulary;
use crate::error::{AlignError, Result};
use crate::io;
use crate::synth::{preset, sample_scenario, DEFAULT_SAMPLES, DEFAULT_SEED};

/// Environment variable consulted when `--jobs` is not given.
pub const JOBS_ENV: &str = "ERROR_ALIGN_JOBS";

#[derive(Debug, Parser)]
#[command(
    name = "error-align",
    version,
    about = "Error- and representation-alignment metrics between classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute one metric for one pair of systems.
    Score(Box<ScoreArgs>),
    /// Score every pair of systems in a manifest on several metrics.
    Pairwise(PairwiseArgs),
    /// Spearman correlations between metrics from score tables.
    Correlate(CorrelateArgs),
    /// Per-domain z-scores of every metric, tagged with family pairs.
    Zscore(ZscoreArgs),
    /// Write a synthetic two-system scenario as CSV files plus a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    metric: Metric,
    /// Ground-truth labels (`instance_id,label`).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Predictions of system A.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Predictions of system B.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long, default_value = "A")]
    a_id: String,
    #[arg(long, default_value = "B")]
    b_id: String,
    /// Class confidences of A (needed by soc, soce).
    #[arg(long)]
    a_conf: Option<PathBuf>,
    #[arg(long)]
    b_conf: Option<PathBuf>,
    /// Activations of A (needed by cka).
    #[arg(long)]
    a_repr: Option<PathBuf>,
    #[arg(long)]
    b_repr: Option<PathBuf>,
    /// Error confusion matrix of A; with --b-confusion, computes cles without per-instance files.
    #[arg(long)]
    a_confusion: Option<PathBuf>,
    #[arg(long)]
    b_confusion: Option<PathBuf>,
    /// Extra class labels, comma-separated, added to the vocabulary.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Dirichlet prior for cles.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = LogBase::Two)]
    log_base: LogBase,
    #[arg(long, default_value = "default")]
    domain: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PairwiseArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated metrics, e.g. `ma,ec,cles`.
    #[arg(long, default_value = "ec,ma,cles")]
    metrics: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = LogBase::Two)]
    log_base: LogBase,
    /// Worker threads; falls back to ERROR_ALIGN_JOBS, then the core count.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Score CSVs; rows from all files are merged.
    #[arg(required = true)]
    scores: Vec<PathBuf>,
    /// Metric pairs, e.g. `ma:cles,ec:ma`. Defaults to every pair present.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<MetricPair>,
    /// Emit the global (pooled) correlation.
    #[arg(long)]
    global: bool,
    /// Emit per-domain correlations and their average.
    #[arg(long)]
    per_domain: bool,
    /// Correlate log(MA) instead of MA.
    #[arg(long)]
    log_ma: bool,
    /// Manifests supplying system families for --exclude-family.
    #[arg(long)]
    manifest: Vec<PathBuf>,
    /// Drop every pair involving a system of this family.
    #[arg(long)]
    exclude_family: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ZscoreArgs {
    #[arg(long, required = true)]
    scores: Vec<PathBuf>,
    /// Manifests supplying the family of every system in the scores.
    #[arg(long, required = true)]
    manifest: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                1
            } else {
                let _ = stdout.write_all(text.as_bytes());
                0
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Score(a) => emit(stdout, a.out.as_deref(), &score(&a)?),
        Command::Pairwise(a) => emit(stdout, a.out.as_deref(), &pairwise(&a)?),
        Command::Correlate(a) => emit(stdout, a.out.as_deref(), &correlate(&a)?),
        Command::Zscore(a) => emit(stdout, a.out.as_deref(), &zscore(&a)?),
        Command::Synth(a) => synth(&a),
    }
}

fn emit(stdout: &mut dyn Write, out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => io::write_atomic(path, contents),
        None => stdout.write_all(contents.as_bytes()).map_err(|e| AlignError::Output {
            path: PathBuf::from("<stdout>"),
            message: e.to_string(),
        }),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str, metric: Metric) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| AlignError::Usage(format!("--{flag} is required for --metric {metric}")))
}

fn score(args: &ScoreArgs) -> Result<String> {
    let opts = ScoreOptions {
        alpha: args.alpha,
        log_base: args.log_base,
    };
    let result = match (&args.a_confusion, &args.b_confusion) {
        (Some(ca), Some(cb)) => {
            if args.metric != Metric::Cles {
                return Err(AlignError::Usage(
                    "confusion-matrix inputs only support --metric cles".into(),
                ));
            }
            let vocab = match &args.truth {
                Some(t) => Arc::clone(io::load_truth(t, &args.labels)?.vocab()),
                None => {
                    let mut labels = io::confusion_labels(ca)?;
                    labels.extend(args.labels.iter().cloned());
                    Arc::new(LabelVocabulary::from_union(labels)?)
                }
            };
            let a = io::load_confusion(ca, &vocab)?;
            let b = io::load_confusion(cb, &vocab)?;
            let prior = SmoothingPrior::uniform(vocab.len(), opts.alpha)?;
            cles(&a.matrix, &b.matrix, &prior, opts.log_base)?
        }
        (None, None) => {
            let m = args.metric;
            let truth = io::load_truth(required(&args.truth, "truth", m)?, &args.labels)?;
            let vocab = Arc::clone(truth.vocab());
            let load =
                |preds: &Option<PathBuf>, conf: &Option<PathBuf>, repr: &Option<PathBuf>, id: &str, side: &str| {
                    let run = io::load_predictions(required(preds, side, m)?, id, &vocab)?;
                    let mut input = SystemInput::new(run);
                    if matches!(m, Metric::Soc | Metric::Soce) {
                        let p = required(conf, &format!("{side}-conf"), m)?;
                        input.confidences = Some(io::load_confidences(p, id, &vocab)?.table);
                    }
                    if m == Metric::Cka {
                        let p = required(repr, &format!("{side}-repr"), m)?;
                        input.representations = Some(io::load_representations(p, id)?);
                    }
                    Ok::<_, AlignError>(input)
                };
            let a = load(&args.a, &args.a_conf, &args.a_repr, &args.a_id, "a")?;
            let b = load(&args.b, &args.b_conf, &args.b_repr, &args.b_id, "b")?;
            if a.id() == b.id() {
                return Err(AlignError::DuplicateSystem(a.id().to_string()));
            }
            score_pair(&truth, &a, &b, &[m], opts)?.pop().expect("one metric")
        }
        _ => {
            return Err(AlignError::Usage(
                "--a-confusion and --b-confusion must be given together".into(),
            ))
        }
    };
    let table = PairwiseScoreTable::new(vec![ScoreRow::from_result(
        &args.domain,
        &args.a_id,
        &args.b_id,
        result,
    )])?;
    Ok(io::scores_to_csv(&table))
}

fn jobs(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(JOBS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| AlignError::Usage(format!("{JOBS_ENV} must be a positive integer, got `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(AlignError::Usage("--jobs must be at least 1".into()));
    }
    Ok(n)
}

fn pairwise(args: &PairwiseArgs) -> Result<String> {
    let metrics = parse_metric_list(&args.metrics)?;
    let manifest = io::load_manifest(&args.manifest)?;
    let (truth, systems) = io::load_manifest_inputs(&manifest)?;
    let opts = ScoreOptions {
        alpha: args.alpha,
        log_base: args.log_base,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs(args.jobs)? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| AlignError::Internal(e.to_string()))?;
    let table = pool.install(|| pairwise_scores(&manifest.domain, &systems, &truth, &metrics, opts))?;
    Ok(io::scores_to_csv(&table))
}

fn load_tables(paths: &[PathBuf]) -> Result<PairwiseScoreTable> {
    let tables = paths.iter().map(|p| io::load_scores(p)).collect::<Result<Vec<_>>>()?;
    PairwiseScoreTable::merge(tables)
}

fn load_families(manifests: &[PathBuf]) -> Result<FamilyMap> {
    let mut families = FamilyMap::default();
    for path in manifests {
        for s in io::load_manifest(path)?.systems {
            families.insert(s.id, s.family)?;
        }
    }
    Ok(families)
}

fn correlate(args: &CorrelateArgs) -> Result<String> {
    let mut table = load_tables(&args.scores)?;
    if !args.exclude_family.is_empty() {
        if args.manifest.is_empty() {
            return Err(AlignError::Usage(
                "--exclude-family needs --manifest to look up families".into(),
            ));
        }
        table = table.exclude_families(&load_families(&args.manifest)?, &args.exclude_family)?;
    }
    if args.log_ma {
        table = table.with_log_ma();
    }
    let pairs = if args.pairs.is_empty() {
        all_metric_pairs(&table)
    } else if args.log_ma {
        args.pairs
            .iter()
            .map(|p| {
                let rename = |m: &str| if m == "ma" { "log_ma".to_string() } else { m.to_string() };
                MetricPair {
                    x: rename(&p.x),
                    y: rename(&p.y),
                }
            })
            .collect()
    } else {
        args.pairs.clone()
    };
    let present = table.metrics();
    for p in &pairs {
        for m in [&p.x, &p.y] {
            if !present.contains(m.as_str()) {
                return Err(AlignError::Usage(format!(
                    "metric `{m}` does not appear in the score tables"
                )));
            }
        }
    }
    let sections = if args.global || args.per_domain {
        io::ReportSections {
            global: args.global,
            per_domain: args.per_domain,
        }
    } else {
        io::ReportSections::default()
    };
    Ok(io::correlation_to_csv(&correlation_report(&table, &pairs), sections))
}

fn zscore(args: &ZscoreArgs) -> Result<String> {
    let table = load_tables(&args.scores)?;
    let families = load_families(&args.manifest)?;
    Ok(io::zscores_to_csv(&zscore_by_metric(&table, &families)?))
}

fn synth(args: &SynthArgs) -> Result<()> {
    let scenario = preset(&args.preset)?.with_samples(args.n).with_seed(args.seed);
    let sample = sample_scenario(&scenario)?;
    fs::create_dir_all(&args.out).map_err(|source| AlignError::Io {
        path: args.out.clone(),
        source,
    })?;
    let vocab = sample.truth.vocab();
    let write = |name: &str, contents: &str| io::write_atomic(&args.out.join(name), contents);
    write("truth.csv", &io::labels_to_csv(sample.truth.entries(), vocab))?;
    write("a.csv", &io::labels_to_csv(sample.run_a.entries(), vocab))?;
    write("b.csv", &io::labels_to_csv(sample.run_b.entries(), vocab))?;
    let system = |id: &str, file: &str| io::ManifestSystem {
        id: id.to_string(),
        family: id.to_string(),
        predictions: PathBuf::from(file),
        confidences: None,
        representations: None,
    };
    let manifest = io::RunManifest {
        domain: scenario.name.clone(),
        truth: PathBuf::from("truth.csv"),
        labels: scenario.labels.clone(),
        systems: vec![system("A", "a.csv"), system("B", "b.csv")],
    };
    write("manifest.toml", &manifest.to_toml()?)
}
