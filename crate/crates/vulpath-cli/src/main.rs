//! Command-line entry point: corpus generation and ingestion, graph
//! export, model training, sink detection, explanation, baselines, and
//! corpus evaluation. Exit codes: 0 success, 1 user error, 2 internal
//! error. Every run logs the effective seed and configuration to stderr.

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use vulpath::baselines::{
    edge_mask_explain, rule_based_sinks, rule_sink_statements, EdgeMaskConfig,
};
use vulpath::corpus::{dedup_md5, generate_synthetic, ingest_directory, split_corpus, Bucket};
use vulpath::eval::{all_methods, evaluate_corpus, report_table};
use vulpath::features::{node_feature_matrix, EmbeddingCheckpoint, EmbeddingTable};
use vulpath::frontend::{build_cpg, cpg_to_json};
use vulpath::nn::{
    checkpoint_digest, DetectorCheckpoint, DetectorModel, SinkCheckpoint, SinkModel,
};
use vulpath::pipeline::{
    explain_function, pooled_paths, predicted_sink_statements, train_pipeline, RunConfig,
    TrainedPipeline,
};
use vulpath::ranker::{explanation_to_json, importance_score, select_explanation};

#[derive(Parser)]
#[command(
    name = "vulpath",
    version,
    about = "Explainable vulnerability path discovery over code property graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus bundle.
    Synth {
        /// Number of functions to generate.
        #[arg(long)]
        n: usize,
        /// RNG seed (overrides the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for .c files plus manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
        /// JSON run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Validate and summarize a corpus bundle.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Optional path for the deduplicated entry list (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the code property graph of one C function as JSON.
    Graph {
        /// C source file containing a single function.
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the sink classifier (embeddings included in the checkpoint).
    TrainSink {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the embedding table as a standalone checkpoint.
        #[arg(long)]
        embeddings_out: Option<PathBuf>,
    },
    /// Train the graph-level detector (embeddings included).
    TrainDetector {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report the sink statements the classifier flags in one function.
    DetectSinks {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        sink_model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain one function: predict sinks, slice, rank, select.
    Explain {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        sink_model: PathBuf,
        #[arg(long)]
        detector: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a baseline explanation method on one function.
    Baseline {
        /// "rules" or "edge_mask".
        #[arg(long)]
        method: String,
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        detector: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate methods over a corpus bundle's test split.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        /// "all" or a comma-separated subset of vulpath,rules,edge_mask.
        #[arg(long, default_value = "all")]
        methods: String,
        /// Sink-model checkpoint; trained from the corpus when absent.
        #[arg(long)]
        sink_model: Option<PathBuf>,
        /// Detector checkpoint; trained from the corpus when absent.
        #[arg(long)]
        detector: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-function parallelism.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(classify(&e));
        }
    }
}

/// User mistakes (bad input, missing files, malformed data) exit 1;
/// anything else is internal and exits 2.
fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<vulpath::corpus::CorpusError>()
            || cause.is::<vulpath::frontend::FrontendError>()
            || cause.is::<UserError>()
        {
            return 1;
        }
        if let Some(nn) = cause.downcast_ref::<vulpath::nn::NnError>() {
            return match nn {
                vulpath::nn::NnError::NoPositives | vulpath::nn::NnError::SingleClass => 1,
                _ => 2,
            };
        }
    }
    2
}

#[derive(Debug)]
struct UserError(String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

fn load_config(path: &Option<PathBuf>, seed_flag: Option<u64>) -> Result<RunConfig> {
    let mut config = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::from_json(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    config = config.with_env_seed();
    if let Some(seed) = seed_flag {
        config.seed = seed;
    }
    Ok(config)
}

fn log_config(config: &RunConfig) {
    eprintln!(
        "seed {} config {}",
        config.seed,
        serde_json::to_string(config).expect("config serializes")
    );
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_function(path: &Path) -> Result<vulpath::frontend::CodePropertyGraph> {
    let source =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(build_cpg(&source)?)
}

fn load_sink(path: &Path) -> Result<(SinkModel, EmbeddingTable, u64)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading sink model {}", path.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    SinkCheckpoint::from_value(&doc).map_err(|e| anyhow!(UserError(e.to_string())))
}

fn load_detector(path: &Path) -> Result<(DetectorModel, EmbeddingTable, u64)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading detector {}", path.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    DetectorCheckpoint::from_value(&doc).map_err(|e| anyhow!(UserError(e.to_string())))
}

/// Train both models from a corpus bundle. Commands that persist only one
/// model still derive identical embeddings from (corpus, seed, config).
fn trained_pipeline(corpus: &Path, config: &RunConfig) -> Result<TrainedPipeline> {
    let entries = ingest_directory(corpus)?;
    let (pipeline, _split) = train_pipeline(entries, config)?;
    Ok(pipeline)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            n,
            seed,
            out,
            config,
        } => {
            let config = load_config(&config, seed)?;
            log_config(&config);
            if n == 0 {
                return Err(anyhow!(UserError("--n must be at least 1".into())));
            }
            let entries = generate_synthetic(n, config.seed);
            vulpath::corpus::write_bundle(&entries, &out)?;
            let vulnerable = entries.iter().filter(|e| e.vulnerable).count();
            println!(
                "wrote {} functions ({} vulnerable) to {}",
                entries.len(),
                vulnerable,
                out.display()
            );
            Ok(())
        }
        Command::Ingest { corpus, out } => {
            let entries = ingest_directory(&corpus)?;
            let total = entries.len();
            let deduped = dedup_md5(entries);
            println!(
                "{} entries, {} after dedup, {} vulnerable",
                total,
                deduped.len(),
                deduped.iter().filter(|e| e.vulnerable).count()
            );
            if let Some(out) = out {
                write_json(&out, &serde_json::to_value(&deduped)?)?;
            }
            Ok(())
        }
        Command::Graph { function, out } => {
            let cpg = read_function(&function)?;
            write_json(&out, &cpg_to_json(&cpg))?;
            println!(
                "{}: {} nodes, {} edges",
                cpg.function_name,
                cpg.nodes.len(),
                cpg.edges.len()
            );
            Ok(())
        }
        Command::TrainSink {
            corpus,
            out,
            config,
            seed,
            embeddings_out,
        } => {
            let config = load_config(&config, seed)?;
            log_config(&config);
            let pipeline = trained_pipeline(&corpus, &config)?;
            let doc = SinkCheckpoint::to_value(
                &pipeline.sink,
                &pipeline.embedding,
                serde_json::to_value(&config)?,
                config.seed,
            );
            write_json(&out, &doc)?;
            println!("sink model digest {}", checkpoint_digest(&doc));
            if let Some(path) = embeddings_out {
                let ckpt = EmbeddingCheckpoint::from(&pipeline.embedding);
                write_json(&path, &serde_json::to_value(&ckpt)?)?;
            }
            Ok(())
        }
        Command::TrainDetector {
            corpus,
            out,
            config,
            seed,
        } => {
            let config = load_config(&config, seed)?;
            log_config(&config);
            let pipeline = trained_pipeline(&corpus, &config)?;
            let doc = DetectorCheckpoint::to_value(
                &pipeline.detector,
                &pipeline.embedding,
                serde_json::to_value(&config)?,
                config.seed,
            );
            write_json(&out, &doc)?;
            println!("detector digest {}", checkpoint_digest(&doc));
            Ok(())
        }
        Command::DetectSinks {
            function,
            sink_model,
            out,
        } => {
            let (model, table, _) = load_sink(&sink_model)?;
            let cpg = read_function(&function)?;
            let features = node_feature_matrix(&cpg, &table);
            let sinks = predicted_sink_statements(&cpg, &features, &model)?;
            let doc = serde_json::json!({
                "function": cpg.function_name,
                "sinks": sinks.iter().map(|(id, p)| serde_json::json!({
                    "node": id,
                    "line": cpg.node(*id).map(|n| n.line).unwrap_or(0),
                    "probability": p,
                })).collect::<Vec<_>>(),
            });
            write_json(&out, &doc)?;
            println!("{} candidate sink(s)", sinks.len());
            Ok(())
        }
        Command::Explain {
            function,
            sink_model,
            detector,
            out,
            config,
        } => {
            let config = load_config(&config, None)?;
            let (sink, table, _) = load_sink(&sink_model)?;
            let (det, _, _) = load_detector(&detector)?;
            let cpg = read_function(&function)?;
            let pipeline = TrainedPipeline {
                sink,
                detector: det,
                embedding: table,
                config,
            };
            let explanation = explain_function(&cpg, &pipeline)?;
            write_json(&out, &explanation_to_json(&explanation))?;
            println!(
                "chosen path lines {:?} (importance {:.4})",
                explanation.chosen.lines, explanation.chosen.importance
            );
            Ok(())
        }
        Command::Baseline {
            method,
            function,
            detector,
            out,
            config,
        } => {
            let config = load_config(&config, None)?;
            let (det, table, _) = load_detector(&detector)?;
            let cpg = read_function(&function)?;
            let features = node_feature_matrix(&cpg, &table);
            let doc = match method.as_str() {
                "rules" => {
                    let hits = rule_based_sinks(&cpg, &config.baseline.sensitive_apis);
                    let sinks = rule_sink_statements(&cpg, &hits);
                    let paths = pooled_paths(&cpg, &sinks, &config.slicer)?;
                    let explanation = select_explanation(&cpg, &paths, &features, &det)?;
                    let mut doc = explanation_to_json(&explanation);
                    doc["method"] = serde_json::json!("rules");
                    doc["hits"] = serde_json::json!(hits
                        .iter()
                        .map(|h| serde_json::json!({
                            "line": h.line,
                            "rule": format!("{:?}", h.rule)
                        }))
                        .collect::<Vec<_>>());
                    doc
                }
                "edge_mask" => {
                    let mask_config = EdgeMaskConfig {
                        lambda: config.baseline.lambda,
                        steps: config.baseline.steps,
                        lr: config.baseline.mask_lr,
                        top_k: config.baseline.top_k,
                    };
                    let outcome = edge_mask_explain(&cpg, &features, &det, &mask_config)?;
                    serde_json::json!({
                        "method": "edge_mask",
                        "function": cpg.function_name,
                        "p_G": outcome.original_probability,
                        "chosen": {
                            "lines": outcome.lines,
                            "p_g": outcome.masked_probability,
                            "importance": importance_score(
                                outcome.original_probability,
                                outcome.masked_probability
                            ),
                        },
                        "alternatives": [],
                    })
                }
                other => {
                    return Err(anyhow!(UserError(format!(
                        "unknown method {other:?}; expected \"rules\" or \"edge_mask\""
                    ))));
                }
            };
            write_json(&out, &doc)?;
            Ok(())
        }
        Command::Eval {
            corpus,
            methods,
            sink_model,
            detector,
            out,
            jobs,
            config,
        } => {
            let config = load_config(&config, None)?;
            log_config(&config);
            let methods: Vec<String> = if methods == "all" {
                all_methods()
            } else {
                methods.split(',').map(|m| m.trim().to_string()).collect()
            };
            for m in &methods {
                if !all_methods().contains(m) {
                    return Err(anyhow!(UserError(format!("unknown method {m:?}"))));
                }
            }
            let entries = dedup_md5(ingest_directory(&corpus)?);
            let split = split_corpus(
                &entries,
                config.seed,
                (
                    config.split.train,
                    config.split.validation,
                    config.split.test,
                ),
            )?;
            let test_ids = split.ids_in(Bucket::Test);
            let test: Vec<_> = entries
                .iter()
                .filter(|e| test_ids.contains(&e.id))
                .cloned()
                .collect();
            let pipeline = match (sink_model, detector) {
                (Some(sink_path), Some(det_path)) => {
                    let (sink, table, _) = load_sink(&sink_path)?;
                    let (det, _, _) = load_detector(&det_path)?;
                    TrainedPipeline {
                        sink,
                        detector: det,
                        embedding: table,
                        config,
                    }
                }
                (None, None) => {
                    eprintln!("no checkpoints given; training both models first");
                    let (pipeline, _) = train_pipeline(entries.clone(), &config)?;
                    pipeline
                }
                _ => {
                    return Err(anyhow!(UserError(
                        "pass both --sink-model and --detector, or neither".into()
                    )));
                }
            };
            let report = evaluate_corpus(&test, &pipeline, &methods, jobs)
                .map_err(|e| anyhow!(UserError(e.to_string())))?;
            write_json(&out, &serde_json::to_value(&report)?)?;
            print!("{}", report_table(&report));
            Ok(())
        }
    }
}
