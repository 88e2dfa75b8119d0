use std::collections::HashMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use visled::clustering::{cut_at, linkage, size_histogram, DistanceSpec, DEFAULT_THRESHOLD};
use visled::embedding_store::{
    join_manifest, l2_normalize, load_embeddings, read_embeddings, write_embeddings, EmbeddingSet, Manifest, SampleId,
    NORM_TOLERANCE,
};
use visled::harness::{
    compare_strategies, generate_synthetic, run_experiment, ExperimentConfig, ReferenceTable, SyntheticConfig, World,
};
use visled::pool_manager::{advance_round, replay, Ledger};
use visled::query::{QueryEngine, QueryOptions};
use visled::sampler::{read_scores_jsonl, Strategy};
use visled::zeroshot::{assign_classes, ClassAssignment, LabelEmbeddingSet};
use visled::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "visled", version, about = "Diversity-driven scene selection over image embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an embedding file (and optionally a manifest) and print a summary.
    Ingest {
        embeddings: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// L2-normalize every vector.
    Normalize {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Average-linkage cosine clustering cut at a distance threshold.
    Cluster {
        embeddings: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Normalize on load instead of rejecting non-unit vectors.
        #[arg(long)]
        normalize: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dendrogram: Option<PathBuf>,
    },
    /// Assign every image to its most similar label.
    Zeroshot {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        min_score: Option<f64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Select the next round of scenes and append it to the ledger.
    Query(QueryArgs),
    /// Generate a synthetic world: embeddings, manifest and label embeddings.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run multi-trial experiments for several strategies and compare them.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "experiment-out")]
        out_dir: PathBuf,
    },
    /// Print the published detector scores for each acquisition round.
    ReferenceTable {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(clap::Args)]
struct QueryArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long, default_value_t = 0.10)]
    budget_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Created if missing, otherwise replayed and extended.
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Cluster the full pool once instead of the unlabeled remainder.
    #[arg(long)]
    no_recluster: bool,
    /// Label embeddings for zero-shot class mining (cwm).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    min_score: Option<f64>,
    /// Precomputed zero-shot assignments (cwm).
    #[arg(long)]
    assignments: Option<PathBuf>,
    /// Mine the manifest's true classes (cwm).
    #[arg(long)]
    use_true_classes: bool,
    /// Per-sample scores (external).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Record a short or empty round instead of failing when the pool runs out.
    #[arg(long)]
    allow_exhausted: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    const INPUT: u8 = 2;
    const CONFIG: u8 = 3;
    const EXHAUSTED: u8 = 4;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Input => Self::INPUT,
            ErrorKind::Config => Self::CONFIG,
            ErrorKind::Io => 1,
        };
        Self::new(code, e.to_string())
    }
}

macro_rules! impl_from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
impl_from_core!(
    visled::embedding_store::StoreError,
    visled::zeroshot::ZeroShotError,
    visled::clustering::ClusterError,
    visled::sampler::SampleError,
    visled::pool_manager::PoolError,
    visled::harness::HarnessError
);

type CliResult<T = ()> = Result<T, Failure>;

fn io_fail(path: &Path, e: io::Error) -> Failure {
    Failure::new(1, format!("{}: {e}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_fail(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::new(1, e.to_string()))
        }
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::new(Failure::CONFIG, format!("{}: {e}", path.display())))
}

fn load_labels(path: &Path) -> CliResult<LabelEmbeddingSet> {
    Ok(LabelEmbeddingSet::from_embeddings(load_embeddings(path, true)?)?)
}

fn ingest(embeddings: &Path, manifest: Option<&Path>) -> CliResult {
    let set = read_embeddings(embeddings)?;
    let mut summary = json!({
        "records": set.len(),
        "dim": set.dim(),
        "normalized": set.is_normalized(NORM_TOLERANCE),
    });
    if let Some(m) = manifest {
        let manifest = Manifest::read(m)?;
        let pool = join_manifest(set, &manifest)?;
        summary["scenes"] = json!(pool.scenes().len());
        summary["fingerprint"] = json!(manifest.fingerprint());
    }
    write_output(None, &format!("{summary}\n"))
}

fn cluster(
    embeddings: &Path,
    threshold: f64,
    normalize: bool,
    out: Option<&Path>,
    dendrogram: Option<&Path>,
) -> CliResult {
    let set = load_embeddings(embeddings, normalize)?;
    let d = linkage(&set, DistanceSpec::default())?;
    let flat = cut_at(&d, set.ids(), threshold)?;
    if let Some(p) = dendrogram {
        fs::write(p, d.to_json()).map_err(|e| io_fail(p, e))?;
    }
    let hist: Vec<String> = size_histogram(&flat).iter().map(|(s, n)| format!("{s}:{n}")).collect();
    eprintln!("{} clusters over {} samples (size:count {})", flat.len(), flat.n_samples(), hist.join(" "));
    write_output(out, &format!("{}\n", flat.to_json()))
}

fn zeroshot(images: &Path, labels: &Path, min_score: Option<f64>, out: Option<&Path>) -> CliResult {
    let images = read_embeddings(images)?;
    let labels = load_labels(labels)?;
    let a = assign_classes(&images, &labels, min_score)?;
    let mut buf = Vec::new();
    a.write_jsonl(&mut buf).expect("writing to memory");
    write_output(out, std::str::from_utf8(&buf).expect("json is utf-8"))
}

fn read_assignments(path: &Path) -> CliResult<ClassAssignment> {
    let f = fs::File::open(path).map_err(|e| io_fail(path, e))?;
    Ok(ClassAssignment::read_jsonl(BufReader::new(f))?)
}

fn read_scores(path: &Path) -> CliResult<HashMap<SampleId, f64>> {
    let f = fs::File::open(path).map_err(|e| io_fail(path, e))?;
    Ok(read_scores_jsonl(BufReader::new(f))?)
}

fn query(args: &QueryArgs) -> CliResult {
    if !(args.budget_frac > 0.0 && args.budget_frac <= 1.0) {
        return Err(Failure::new(Failure::CONFIG, "--budget-frac must lie in (0, 1]"));
    }
    let manifest = Manifest::read(&args.manifest)?;
    let set = read_embeddings(&args.embeddings)?;
    let set = if set.is_normalized(NORM_TOLERANCE) { set } else { l2_normalize(&set) };
    let pool = join_manifest(set, &manifest)?;

    let ledger = if args.ledger.exists() { Ledger::read(&args.ledger)? } else { Ledger::new(&manifest) };
    let state = replay(&ledger, &manifest)?;

    let options = QueryOptions { threshold: args.threshold, recluster: !args.no_recluster, ..Default::default() };
    let assignment = match (&args.assignments, &args.labels) {
        (Some(p), _) => Some(read_assignments(p)?),
        (None, Some(l)) => Some(assign_classes(pool.set(), &load_labels(l)?, args.min_score)?),
        (None, None) => None,
    };
    let scores = args.scores.as_deref().map(read_scores).transpose()?;

    let mut engine = QueryEngine::new(&pool, options);
    if args.use_true_classes {
        engine = engine.with_true_classes();
    } else if let Some(a) = &assignment {
        engine = engine.with_assignment(a);
    }
    if let Some(s) = &scores {
        engine = engine.with_scores(s);
    }

    let budget = ((args.budget_frac * pool.scenes().len() as f64).round() as usize).max(1);
    let report = engine.select(&state, args.strategy, budget, args.seed)?;
    if report.exhausted && !args.allow_exhausted {
        return Err(Failure::new(
            Failure::EXHAUSTED,
            format!(
                "only {} of {budget} scenes available; pass --allow-exhausted to record the round",
                report.selections.len()
            ),
        ));
    }
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let (next, ledger) = advance_round(&state, &report, &ledger, now)?;
    ledger.write(&args.ledger)?;
    eprintln!(
        "round {}: {} scenes selected, {} of {} labeled",
        next.round,
        report.selections.len(),
        next.labeled.len(),
        next.all_scenes.len()
    );
    write_output(args.report.as_deref(), &format!("{}\n", report.to_json()))
}

fn write_world_files(dir: &Path, set: &EmbeddingSet, manifest: &Manifest, labels: &LabelEmbeddingSet) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    write_embeddings(set, dir.join("embeddings.vled"))?;
    manifest.write(dir.join("manifest.json"))?;
    let records = labels
        .names()
        .iter()
        .enumerate()
        .map(|(k, c)| (SampleId::new(c.as_str()).expect("class names are valid ids"), labels.vector(k).to_vec()))
        .collect();
    write_embeddings(&EmbeddingSet::new(labels.dim(), records)?, dir.join("labels.vled"))?;
    Ok(())
}

fn synth(config: Option<&Path>, out_dir: &Path) -> CliResult {
    let cfg: SyntheticConfig = match config {
        Some(p) => read_config(p)?,
        None => SyntheticConfig::default(),
    };
    let world = generate_synthetic(&cfg)?;
    write_world_files(out_dir, &world.set, &world.manifest, &world.labels)?;
    let counts: serde_json::Map<String, serde_json::Value> =
        world.scene_counts.iter().map(|(c, n)| (c.to_string(), json!(n))).collect();
    write_output(None, &format!("{}\n", json!({ "samples": world.set.len(), "scene_counts": counts })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalWorld {
    embeddings: PathBuf,
    manifest: PathBuf,
    labels: Option<PathBuf>,
    scores: Option<PathBuf>,
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Random, Strategy::Owe, Strategy::Cwm]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    /// Generate a synthetic world. Ignored when `world` is set.
    #[serde(default)]
    synthetic: SyntheticConfig,
    world: Option<ExternalWorld>,
    #[serde(default)]
    experiment: ExperimentConfig,
    #[serde(default = "default_strategies")]
    strategies: Vec<Strategy>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn experiment(config: &Path, trials: Option<usize>, out_dir: &Path) -> CliResult {
    let file: ExperimentFile = read_config(config)?;
    if file.strategies.is_empty() {
        return Err(Failure::new(Failure::CONFIG, "strategies must not be empty"));
    }
    let world = match &file.world {
        Some(w) => {
            let base = config.parent().unwrap_or(Path::new("."));
            let set = load_embeddings(resolve(base, &w.embeddings), true)?;
            let manifest = Manifest::read(resolve(base, &w.manifest))?;
            let mut world = World::new(set, manifest)?;
            world.labels = w.labels.as_ref().map(|p| load_labels(&resolve(base, p))).transpose()?;
            world.scores = w.scores.as_ref().map(|p| read_scores(&resolve(base, p))).transpose()?;
            world
        }
        None => World::from_synthetic(generate_synthetic(&file.synthetic)?)?,
    };

    let ledger_dir = out_dir.join("ledgers");
    fs::create_dir_all(&ledger_dir).map_err(|e| io_fail(&ledger_dir, e))?;
    let mut reports = Vec::new();
    for &strategy in &file.strategies {
        let mut cfg = ExperimentConfig { strategy, ..file.experiment.clone() };
        if let Some(t) = trials {
            cfg.trials = t;
        }
        let report = run_experiment(&cfg, &world)?;
        let tag = strategy.as_str();
        let n = reports.iter().filter(|r: &&visled::harness::MetricsReport| r.strategy == strategy).count();
        let tag = if n == 0 { tag.to_string() } else { format!("{tag}-{}", n + 1) };
        for t in &report.trials {
            if let Some(l) = &t.ledger {
                l.write(ledger_dir.join(format!("{tag}-trial{}.jsonl", t.trial)))?;
            }
        }
        let path = out_dir.join(format!("metrics-{tag}.json"));
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(&path, text).map_err(|e| io_fail(&path, e))?;
        reports.push(report);
    }
    let table = compare_strategies(&reports)?;
    for (name, text) in [("comparison.csv", table.to_csv()), ("comparison.json", table.to_json())] {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| io_fail(&path, e))?;
    }
    write_output(None, &table.to_csv())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest { embeddings, manifest } => ingest(&embeddings, manifest.as_deref()),
        Command::Normalize { input, out } => {
            let set = read_embeddings(&input)?;
            write_embeddings(&l2_normalize(&set), &out)?;
            Ok(())
        }
        Command::Cluster { embeddings, threshold, normalize, out, dendrogram } => {
            cluster(&embeddings, threshold, normalize, out.as_deref(), dendrogram.as_deref())
        }
        Command::Zeroshot { images, labels, min_score, out } => zeroshot(&images, &labels, min_score, out.as_deref()),
        Command::Query(args) => query(&args),
        Command::Synth { config, out_dir } => synth(config.as_deref(), &out_dir),
        Command::Experiment { config, trials, out_dir } => experiment(&config, trials, &out_dir),
        Command::ReferenceTable { format } => {
            let t = ReferenceTable::get();
            let text = match format {
                Format::Text => t.to_string(),
                Format::Csv => t.to_csv(),
                Format::Json => t.to_json() + "\n",
            };
            write_output(None, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Failure::CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("visled: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
