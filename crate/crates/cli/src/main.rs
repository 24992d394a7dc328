use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sentitrend::corpus::{load_csv, split, DEFAULT_RATIO, DEFAULT_SEED};
use sentitrend::eval::{evaluate, render_report, ReportFormat, ReportRow};
use sentitrend::features::DEFAULT_MAX_FEATURES;
use sentitrend::models::{load_model, save_model, ArtifactHeader, DEFAULT_FOLDS, DEFAULT_GRID};
use sentitrend::pipeline::{benchmark, fit_bundle, run_grid_search, ModelKind, PipelineConfig};
use sentitrend::service::{Anonymizer, Service, ServiceConfig};
use sentitrend::{LabeledDocument, ModelBundle, PreprocessConfig, TrainConfig, Weighting};

type Fallible<T = ()> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "sentitrend", version, about = "Train, evaluate and serve tweet sentiment classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and write an artifact.
    Train(TrainArgs),
    /// Cross-validate the regularisation strength of a linear model on the
    /// training part of the split.
    GridSearch(GridArgs),
    /// Score saved models on a labelled CSV.
    Evaluate(EvaluateArgs),
    /// Split once, train every model kind and report test metrics.
    Benchmark(BenchmarkArgs),
    /// Classify texts given as arguments or on stdin.
    Predict(PredictArgs),
    /// Classify an NDJSON stream and expose trends over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    PlainTable,
    Csv,
    JsonLines,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::PlainTable => ReportFormat::PlainTable,
            Format::Csv => ReportFormat::Csv,
            Format::JsonLines => ReportFormat::JsonLines,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NbWeighting {
    Tfidf,
    RawCount,
}

#[derive(Args)]
struct SplitArgs {
    /// Fraction of each class kept for training.
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    ratio: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_FEATURES)]
    max_features: usize,
    #[arg(long)]
    no_stopwords: bool,
    #[arg(long)]
    no_lowercase: bool,
    /// Inverse regularisation strength for logreg and svm.
    #[arg(long = "c", default_value_t = 1.0)]
    c_value: f64,
    /// Naive Bayes smoothing.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = NbWeighting::Tfidf)]
    nb_weighting: NbWeighting,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
}

impl FeatureArgs {
    fn pipeline(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            preprocess: PreprocessConfig {
                strip_stopwords: !self.no_stopwords,
                lowercase: !self.no_lowercase,
                ..PreprocessConfig::default()
            },
            max_features: self.max_features,
            nb_weighting: match self.nb_weighting {
                NbWeighting::Tfidf => Weighting::TfIdf,
                NbWeighting::RawCount => Weighting::RawCount,
            },
            train: TrainConfig {
                c_value: self.c_value,
                alpha: self.alpha,
                max_epochs: self.max_epochs,
                seed,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    kind: ModelKind,
    /// Output artifact path.
    #[arg(long)]
    model: PathBuf,
    /// Train on the training part of the split only and report test metrics.
    #[arg(long)]
    split: bool,
    #[command(flatten)]
    split_args: SplitArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long, value_enum, default_value_t = Format::PlainTable)]
    format: Format,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// logreg or svm.
    #[arg(long)]
    kind: ModelKind,
    /// Comma-separated C values.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID.to_vec())]
    grid: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[command(flatten)]
    split_args: SplitArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// One or more artifacts; each becomes a report row.
    #[arg(long, required = true, num_args = 1..)]
    model: Vec<PathBuf>,
    /// Score only the test part of the split.
    #[arg(long)]
    split: bool,
    #[command(flatten)]
    split_args: SplitArgs,
    #[arg(long, value_enum, default_value_t = Format::PlainTable)]
    format: Format,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    split_args: SplitArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long, value_enum, default_value_t = Format::PlainTable)]
    format: Format,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Read one text per line from stdin.
    #[arg(long)]
    stdin: bool,
    texts: Vec<String>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    /// Also accept raw NDJSON over TCP on this address.
    #[arg(long)]
    ndjson_bind: Option<String>,
    /// Process NDJSON from stdin to stdout, then exit.
    #[arg(long)]
    stdin: bool,
    /// Where malformed lines go in --stdin mode (default: stderr).
    #[arg(long)]
    dead_letter: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    bucket_seconds: u64,
    #[arg(long, default_value_t = 1440)]
    retained_buckets: usize,
    /// Keep raw ids and mentions.
    #[arg(long)]
    no_anonymize: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::GridSearch(a) => grid(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Benchmark(a) => benchmark_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolved(command: &str, fields: serde_json::Value) {
    eprintln!("{command}: {fields}");
}

fn pipeline_json(cfg: &PipelineConfig) -> serde_json::Value {
    serde_json::json!({
        "lowercase": cfg.preprocess.lowercase,
        "stopwords": cfg.preprocess.strip_stopwords,
        "max_features": cfg.max_features,
        "nb_weighting": cfg.nb_weighting,
        "train": cfg.train,
    })
}

fn read_dataset(path: &Path) -> Fallible<Vec<LabeledDocument>> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(load_csv(BufReader::new(file))?)
}

fn read_model(path: &Path) -> Fallible<(ModelBundle, ArtifactHeader)> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(load_model(BufReader::new(file))?)
}

fn write_report(rows: &[ReportRow], format: Format) -> Fallible {
    let stdout = io::stdout();
    render_report(rows, format.into(), stdout.lock())?;
    Ok(())
}

fn train(a: TrainArgs) -> Fallible {
    let cfg = a.features.pipeline(a.split_args.seed);
    resolved(
        "train",
        serde_json::json!({
            "dataset": a.dataset, "kind": a.kind, "model": a.model, "split": a.split,
            "ratio": a.split_args.ratio, "seed": a.split_args.seed, "pipeline": pipeline_json(&cfg),
        }),
    );
    let docs = read_dataset(&a.dataset)?;
    let (train_docs, test_docs) = if a.split {
        let parts = split(&docs, a.split_args.ratio, a.split_args.seed)?;
        (parts.train, Some(parts.test))
    } else {
        (docs, None)
    };
    let (bundle, summary) = fit_bundle(a.kind, &train_docs, &cfg)?;
    let mut out = BufWriter::new(File::create(&a.model)?);
    let header = save_model(&bundle, &mut out)?;
    out.flush()?;
    log::info!(
        "trained {} on {} docs, vocabulary {}, wrote {} ({})",
        summary.kind,
        summary.n_docs,
        summary.vocabulary_size,
        a.model.display(),
        header.model_version()
    );
    if let Some(test) = test_docs {
        let (cm, report) = evaluate(&bundle, &test)?;
        write_report(&[ReportRow::new(a.kind.as_str(), cm, report)], a.format)?;
    }
    Ok(())
}

fn grid(a: GridArgs) -> Fallible {
    let linear = a
        .kind
        .linear_kind()
        .ok_or("grid search applies to logreg and svm only")?;
    let cfg = a.features.pipeline(a.split_args.seed);
    resolved(
        "grid-search",
        serde_json::json!({
            "dataset": a.dataset, "kind": a.kind, "grid": a.grid, "folds": a.folds,
            "ratio": a.split_args.ratio, "seed": a.split_args.seed, "pipeline": pipeline_json(&cfg),
        }),
    );
    let docs = read_dataset(&a.dataset)?;
    let docs = split(&docs, a.split_args.ratio, a.split_args.seed)?.train;
    let result = run_grid_search(linear, &docs, &cfg, &a.grid, a.folds)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{:>10}  {:>8}  {:>8}", "C", "mean_f1", "std")?;
    for row in &result.rows {
        writeln!(out, "{:>10}  {:>8.4}  {:>8.4}", row.c_value, row.mean, row.std)?;
    }
    writeln!(out, "best C = {}", result.best_c)?;
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Fallible {
    resolved(
        "evaluate",
        serde_json::json!({
            "dataset": a.dataset, "models": a.model, "split": a.split,
            "ratio": a.split_args.ratio, "seed": a.split_args.seed,
        }),
    );
    let mut docs = read_dataset(&a.dataset)?;
    if a.split {
        docs = split(&docs, a.split_args.ratio, a.split_args.seed)?.test;
    }
    let mut rows = Vec::new();
    for path in &a.model {
        let (bundle, header) = read_model(path)?;
        let (cm, report) = evaluate(&bundle, &docs)?;
        rows.push(ReportRow::new(header.model_kind.clone(), cm, report));
    }
    write_report(&rows, a.format)
}

fn benchmark_cmd(a: BenchmarkArgs) -> Fallible {
    let cfg = a.features.pipeline(a.split_args.seed);
    resolved(
        "benchmark",
        serde_json::json!({
            "dataset": a.dataset, "ratio": a.split_args.ratio, "seed": a.split_args.seed,
            "pipeline": pipeline_json(&cfg),
        }),
    );
    let docs = read_dataset(&a.dataset)?;
    let run = benchmark(&docs, a.split_args.ratio, a.split_args.seed, &ModelKind::ALL, &cfg)?;
    log::info!("train {} / test {} documents", run.train_size, run.test_size);
    for (row, secs) in run.rows.iter().zip(&run.seconds) {
        log::info!("{}: {secs:.2}s", row.model);
    }
    write_report(&run.rows, a.format)
}

fn predict(a: PredictArgs) -> Fallible {
    if a.stdin == !a.texts.is_empty() {
        return Err("give texts as arguments or pass --stdin, not both".into());
    }
    let (bundle, header) = read_model(&a.model)?;
    let version = header.model_version();
    let texts: Box<dyn Iterator<Item = io::Result<String>>> = if a.stdin {
        Box::new(io::stdin().lines())
    } else {
        Box::new(a.texts.into_iter().map(Ok))
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for text in texts {
        let text = text?;
        let p = bundle.predict_text(&text)?;
        serde_json::to_writer(
            &mut out,
            &serde_json::json!({
                "text": text, "label": p.label, "scores": p.scores, "model_version": version,
            }),
        )?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn serve(a: ServeArgs) -> Fallible {
    if a.bucket_seconds == 0 || a.retained_buckets == 0 {
        return Err("--bucket-seconds and --retained-buckets must be positive".into());
    }
    resolved(
        "serve",
        serde_json::json!({
            "model": a.model, "bind": a.bind, "ndjson_bind": a.ndjson_bind, "stdin": a.stdin,
            "bucket_seconds": a.bucket_seconds, "retained_buckets": a.retained_buckets,
            "anonymize": !a.no_anonymize,
        }),
    );
    let (bundle, header) = read_model(&a.model)?;
    let anonymizer = (!a.no_anonymize).then(Anonymizer::from_env);
    let config = ServiceConfig {
        bucket_seconds: a.bucket_seconds,
        retained_buckets: a.retained_buckets,
    };
    let service = Arc::new(Service::new(bundle, header.model_version(), anonymizer, config));

    if a.stdin {
        let dead: Box<dyn Write> = match &a.dead_letter {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stderr()),
        };
        service.process_ndjson(io::stdin().lock(), BufWriter::new(io::stdout().lock()), dead)?;
    } else {
        let runtime = tokio::runtime::Runtime::new()?;
        runtime.block_on(run_servers(service.clone(), &a.bind, a.ndjson_bind.as_deref()))?;
    }
    log::info!("counters: {}", serde_json::to_string(&service.counters())?);
    Ok(())
}

async fn run_servers(service: Arc<Service>, bind: &str, ndjson_bind: Option<&str>) -> Fallible {
    use sentitrend::service::http::{serve_http, serve_ndjson};
    use tokio::net::TcpListener;
    use tokio::sync::watch;

    // Install the handler before announcing the listeners so an early
    // interrupt is not lost to the default disposition.
    let interrupted = interrupt()?;
    let http = TcpListener::bind(bind).await?;
    log::info!("http listening on {}", http.local_addr()?);
    let (tx, rx) = watch::channel(false);
    let stopped = |mut rx: watch::Receiver<bool>| async move {
        let _ = rx.wait_for(|v| *v).await;
    };

    let mut tasks = tokio::task::JoinSet::new();
    tasks.spawn(serve_http(service.clone(), http, stopped(rx.clone())));
    if let Some(addr) = ndjson_bind {
        let listener = TcpListener::bind(addr).await?;
        log::info!("ndjson listening on {}", listener.local_addr()?);
        let svc = service.clone();
        let rx = rx.clone();
        tasks.spawn(async move { serve_ndjson(svc, listener, stopped(rx)).await });
    }

    interrupted.await;
    log::info!("shutting down");
    tx.send(true)?;
    while let Some(res) = tasks.join_next().await {
        res??;
    }
    Ok(())
}

#[cfg(unix)]
fn interrupt() -> io::Result<impl std::future::Future<Output = ()>> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut int = signal(SignalKind::interrupt())?;
    let mut term = signal(SignalKind::terminate())?;
    Ok(async move {
        tokio::select! {
            _ = int.recv() => {}
            _ = term.recv() => {}
        }
    })
}

#[cfg(not(unix))]
fn interrupt() -> io::Result<impl std::future::Future<Output = ()>> {
    Ok(async {
        let _ = tokio::signal::ctrl_c().await;
    })
}
