mod config;

use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use driftdet::corpus::load_annotated_corpus;
use driftdet::detector::{load_pipeline, save_pipeline, train_pipeline, DriftVerdict, TrainedPipeline};
use driftdet::eval::{benchmark_csv, default_threshold_grid, run_benchmark, BenchmarkOptions};
use driftdet::explain::{explain_sample, render_highlights};
use driftdet::syntax_stats::{
    compare_stats, compute_stats, generate_sentence_rules, render_report_text, BigramChunker, CompareOptions,
};

use config::{load_run_config, resolve_corpus, resolve_pipeline, ConfigError, CorpusFlags, PipelineFlags};

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "driftdet", version, about = "Detect and explain text drift against a training corpus")]
struct Cli {
    /// Run configuration (TOML, or JSON with a .json extension)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a pipeline and save it to a model directory
    Train(TrainArgs),
    /// Score payload documents against a saved pipeline
    Score(ScoreArgs),
    /// Explain drifted payload documents word by word
    Explain(ExplainArgs),
    /// Compare syntactic statistics of two CoNLL-U corpora
    Stats(StatsArgs),
    /// Benchmark accuracy on in- and out-of-distribution corpora
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    corpus_flags: CorpusFlags,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    payload: Option<PathBuf>,
    #[command(flatten)]
    corpus_flags: CorpusFlags,
    /// Override the saved threshold
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    payload: Option<PathBuf>,
    #[command(flatten)]
    corpus_flags: CorpusFlags,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    top_k: u64,
    #[arg(long)]
    threshold: Option<f64>,
    /// Plain `[[word]]` markers instead of ANSI colour
    #[arg(long)]
    no_color: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    payload: PathBuf,
    /// CoNLL-2000 chunk file for training the phrase chunker
    #[arg(long)]
    chunker: Option<PathBuf>,
    #[arg(long)]
    new_pattern_threshold: Option<f64>,
    #[arg(long)]
    rule_train_max: Option<f64>,
    #[arg(long)]
    rule_payload_min: Option<f64>,
    /// Also write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    iid: Option<PathBuf>,
    #[arg(long)]
    ood: Option<PathBuf>,
    #[command(flatten)]
    corpus_flags: CorpusFlags,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Comma-separated thresholds [default: fine grid over 0..1]
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    split_fraction: Option<f64>,
    /// Name of the dataset pair in the CSV output
    #[arg(long)]
    pair: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e:#}", error_kind(&e));
            ExitCode::FAILURE
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(err) = e.chain().find_map(|c| c.downcast_ref::<driftdet::Error>()) {
        return err.kind();
    }
    if e.chain().any(|c| c.downcast_ref::<ConfigError>().is_some()) {
        return "ConfigError";
    }
    if e.chain().any(|c| c.downcast_ref::<io::Error>().is_some()) {
        return "IoError";
    }
    "Error"
}

fn run(cli: Cli) -> Result<()> {
    let config = load_run_config(cli.config.as_deref())?;
    match cli.command {
        Command::Train(a) => cmd_train(config, a),
        Command::Score(a) => cmd_score(config, a),
        Command::Explain(a) => cmd_explain(config, a),
        Command::Stats(a) => cmd_stats(config, a),
        Command::Eval(a) => cmd_eval(config, a),
    }
}

fn write_json_line(out: &mut impl Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn cmd_train(config: config::RunConfig, a: TrainArgs) -> Result<()> {
    let pipeline = resolve_pipeline(config.pipeline, &a.pipeline)?;
    let corpus = resolve_corpus(a.corpus, &a.corpus_flags, config.corpus.as_ref(), "training")?;
    let out_dir = a
        .out
        .or(config.model_dir)
        .ok_or_else(|| anyhow!(ConfigError("no output directory: pass --out".into())))?;

    let docs = corpus.load()?;
    let started = Instant::now();
    let pipe = train_pipeline(&docs, &pipeline)?;
    let seconds = started.elapsed().as_secs_f64();
    save_pipeline(&pipe, &out_dir)?;

    let m = &pipe.metadata;
    if a.json {
        // timing goes to stderr so the JSON is reproducible
        eprintln!("train_seconds: {seconds:.3}");
        write_json_line(
            &mut io::stdout().lock(),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "model_dir": out_dir,
                "n_documents": m.n_documents,
                "n_dropped": m.n_dropped,
                "dim": m.dim,
                "model_kind": pipe.model.kind().as_str(),
                "backend": pipe.backend.kind().as_str(),
            }),
        )?;
    } else {
        println!(
            "trained {} pipeline on {} documents ({} dropped), dim {}, backend {}, {:.3} s",
            pipe.model.kind().as_str(),
            m.n_documents,
            m.n_dropped,
            m.dim,
            pipe.backend.kind().as_str(),
            seconds
        );
        println!("saved to {}", out_dir.display());
    }
    Ok(())
}

fn open_pipeline(model: Option<PathBuf>, config_dir: Option<PathBuf>, threshold: Option<f64>) -> Result<TrainedPipeline> {
    let dir = model
        .or(config_dir)
        .ok_or_else(|| anyhow!(ConfigError("no model directory: pass --model".into())))?;
    let mut pipe = load_pipeline(&dir).with_context(|| format!("loading model from {}", dir.display()))?;
    if let Some(t) = threshold {
        pipe.config.threshold = t;
        pipe.config.validate()?;
    }
    Ok(pipe)
}

fn verdict_json(v: &DriftVerdict) -> serde_json::Value {
    let mut value = serde_json::to_value(v).expect("verdict serializes");
    value["schema_version"] = json!(SCHEMA_VERSION);
    value
}

fn verdict_line(v: &DriftVerdict) -> String {
    let label = if v.drifted { "Drifted" } else { "Not drifted" };
    let flag = v.flag.map(|f| format!(" [{}]", serde_json::to_value(f).expect("flag").as_str().unwrap_or(""))).unwrap_or_default();
    format!("{}\t{label}, {}{flag}", v.doc_id, v.score.value())
}

fn cmd_score(config: config::RunConfig, a: ScoreArgs) -> Result<()> {
    let pipe = open_pipeline(a.model, config.model_dir, a.threshold)?;
    let payload = resolve_corpus(a.payload, &a.corpus_flags, config.payload.as_ref(), "payload")?;
    let docs = payload.load()?;
    let verdicts = pipe.score_payloads(&docs)?;

    let mut out = io::stdout().lock();
    for v in &verdicts {
        if a.json {
            write_json_line(&mut out, &verdict_json(v))?;
        } else {
            writeln!(out, "{}", verdict_line(v))?;
        }
    }
    let drifted = verdicts.iter().filter(|v| v.drifted).count();
    let summary = format!(
        "drift rate: {drifted}/{} ({:.2} %) at threshold {}",
        verdicts.len(),
        100.0 * drifted as f64 / verdicts.len() as f64,
        pipe.threshold()
    );
    if a.json {
        eprintln!("{summary}");
    } else {
        writeln!(out, "{summary}")?;
    }
    Ok(())
}

fn cmd_explain(config: config::RunConfig, a: ExplainArgs) -> Result<()> {
    let pipe = open_pipeline(a.model, config.model_dir, a.threshold)?;
    let payload = resolve_corpus(a.payload, &a.corpus_flags, config.payload.as_ref(), "payload")?;
    let docs = payload.load()?;
    let color = !a.no_color && io::stdout().is_terminal();
    let top_k = a.top_k as usize;

    let mut out = io::stdout().lock();
    for (doc, verdict) in docs.iter().zip(pipe.score_payloads(&docs)?) {
        if !verdict.drifted {
            if a.json {
                write_json_line(
                    &mut out,
                    &json!({
                        "schema_version": SCHEMA_VERSION,
                        "doc_id": doc.id,
                        "drifted": false,
                        "score": verdict.score.value(),
                        "note": "not drifted, no explanation",
                    }),
                )?;
            } else {
                writeln!(out, "{}\tnot drifted, no explanation ({})", doc.id, verdict.score.value())?;
            }
            continue;
        }
        let exp = match explain_sample(&pipe, doc) {
            Ok(exp) => exp,
            Err(driftdet::Error::EmptyAfterCleaning(_)) => {
                let note = "nothing left after cleaning to explain";
                if a.json {
                    write_json_line(
                        &mut out,
                        &json!({
                            "schema_version": SCHEMA_VERSION,
                            "doc_id": doc.id,
                            "drifted": true,
                            "score": verdict.score.value(),
                            "note": note,
                        }),
                    )?;
                } else {
                    writeln!(out, "{}\tDrifted, {note}", doc.id)?;
                }
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let h = render_highlights(&exp, top_k);
        if a.json {
            let mut value = serde_json::to_value(&exp)?;
            value["schema_version"] = json!(SCHEMA_VERSION);
            value["drifted"] = json!(true);
            value["highlights"] = serde_json::to_value(&h.marked)?;
            if let Some(note) = h.note {
                value["note"] = json!(note);
            }
            write_json_line(&mut out, &value)?;
        } else {
            writeln!(out, "{}\tDrifted, {}", doc.id, exp.base_score)?;
            writeln!(out, "  {}", if color { &h.ansi } else { &h.plain })?;
            match h.note {
                Some(note) => writeln!(out, "  {note}")?,
                None => {
                    let tops: Vec<String> = h.marked.iter().map(|m| format!("{} ({:+.6})", m.token, m.h)).collect();
                    writeln!(out, "  top contributors: {}", tops.join(", "))?;
                }
            }
        }
    }
    Ok(())
}

fn cmd_stats(config: config::RunConfig, a: StatsArgs) -> Result<()> {
    let cfg = config.stats;
    let opts = CompareOptions {
        new_pattern_threshold: a.new_pattern_threshold.unwrap_or(cfg.new_pattern_threshold),
        rule_train_max: a.rule_train_max.unwrap_or(cfg.rule_train_max),
        rule_payload_min: a.rule_payload_min.unwrap_or(cfg.rule_payload_min),
    };
    let train = load_annotated_corpus(&a.train).with_context(|| format!("reading {}", a.train.display()))?;
    let payload = load_annotated_corpus(&a.payload).with_context(|| format!("reading {}", a.payload.display()))?;

    let mut notes = Vec::new();
    let chunker = match a.chunker.or(cfg.chunker) {
        Some(path) if path.exists() => Some(BigramChunker::from_path(&path)?),
        Some(path) => {
            notes.push(format!("chunk density skipped: chunker file {} not found", path.display()));
            None
        }
        None => None,
    };

    let rules = generate_sentence_rules();
    let t = compute_stats(&train, &rules, chunker.as_ref())?;
    let p = compute_stats(&payload, &rules, chunker.as_ref())?;
    let mut report = compare_stats(&t, &p, &opts);
    if !notes.is_empty() {
        report.notes = notes;
    }

    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = &a.out {
        fs::write(path, format!("{json}\n")).map_err(|e| driftdet::Error::io(path, e))?;
    }
    if a.json {
        println!("{json}");
    } else {
        print!("{}", render_report_text(&report));
    }
    Ok(())
}

fn cmd_eval(config: config::RunConfig, a: EvalArgs) -> Result<()> {
    let pipeline = resolve_pipeline(config.pipeline, &a.pipeline)?;
    let iid = resolve_corpus(a.iid, &a.corpus_flags, config.corpus.as_ref(), "in-distribution")?;
    // the OOD file is one stratum; labels are not needed
    let ood = resolve_corpus(a.ood, &CorpusFlags::default(), config.payload.as_ref(), "out-of-distribution")?;
    let thresholds = a
        .thresholds
        .or(config.eval.thresholds)
        .unwrap_or_else(default_threshold_grid);
    let opts = BenchmarkOptions {
        split_fraction: a.split_fraction.unwrap_or(config.eval.split_fraction),
        seed: pipeline.seed,
    };
    let pair = a.pair.or(config.eval.pair).unwrap_or_else(|| {
        let stem = |p: &PathBuf| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{}-vs-{}", stem(&iid.path), stem(&ood.path))
    });

    let report = run_benchmark(&iid.load()?, &ood.load()?, &pipeline, &thresholds, &opts)?;
    let csv = benchmark_csv(&pair, &pipeline, &report)?;
    if let Some(path) = a.csv.or(config.eval.csv) {
        fs::write(&path, &csv).map_err(|e| driftdet::Error::io(&path, e))?;
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "pair": pair,
        "backend": pipeline.backend.kind().as_str(),
        "model": pipeline.model_kind.as_str(),
        "n_train": report.n_train,
        "n_dropped": report.n_dropped,
        "best": report.best,
        "at_config_threshold": report.at_config_threshold,
        "sweep": report.sweep,
        "train_seconds": report.train_seconds,
        "infer_seconds": report.infer_seconds,
    });
    if let Some(path) = config.eval.json {
        fs::write(&path, format!("{}\n", serde_json::to_string_pretty(&summary)?))
            .map_err(|e| driftdet::Error::io(&path, e))?;
    }
    if a.json {
        write_json_line(&mut io::stdout().lock(), &summary)?;
    } else {
        let b = &report.best;
        let d = &report.at_config_threshold;
        println!("pair {pair}: trained on {} documents in {:.3} s, scored in {:.3} s", report.n_train, report.train_seconds, report.infer_seconds);
        println!(
            "best threshold {}: accuracy {:.5} (iid {}/{}, ood {}/{})",
            b.threshold, b.accuracy, b.correct_iid, b.n_iid, b.correct_ood, b.n_ood
        );
        println!("threshold {}: accuracy {:.5}", d.threshold, d.accuracy);
    }
    Ok(())
}
