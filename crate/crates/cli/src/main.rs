//! `lemma-engine`: inspect rules, train, predict, evaluate and run ablations.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use lemma_engine::ablate::{self, AblateError, RunFile};
use lemma_engine::conllu::{self, serialize_document, Document};
use lemma_engine::corpus::{self, Granularity, LoadOptions, SourceMap};
use lemma_engine::eval::{self, score_documents, EvalOptions, EvalReport};
use lemma_engine::model::{annotate_document, ModelParams};
use lemma_engine::par::Execution;
use lemma_engine::train::{self, Hyperparams};
use lemma_engine::vectors::VectorFile;

#[derive(Parser)]
#[command(
    name = "lemma-engine",
    version,
    about = "Joint lemmatizer and UPOS tagger for CoNLL-U"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the most frequent lemma rules of a corpus set.
    Rules {
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        allow_copy: bool,
    },
    /// Train a model and write it to --out.
    Train(TrainArgs),
    /// Fill LEMMA and UPOS of a CoNLL-U file; output goes to stdout.
    Predict {
        model: PathBuf,
        input: PathBuf,
        /// Source (corpus or author) name; unknown names use the generic id.
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Score predictions against gold files.
    Eval(EvalArgs),
    /// Train and evaluate every configuration of a run file.
    Ablate {
        run_file: PathBuf,
        /// Where to write the TSV grid; without it the grid goes to stdout
        /// and the summary to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    granularity: Option<Granularity>,
    /// Sidecar vectors aligned with the training corpora in config order.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f32>,
    #[arg(long)]
    dev_fraction: Option<f64>,
    /// Hashing dimension.
    #[arg(long)]
    dim: Option<u32>,
    #[arg(long)]
    allow_copy: bool,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("system").required(true).args(["model", "predicted"]))]
struct EvalArgs {
    /// Gold CoNLL-U files.
    #[arg(required = true)]
    gold: Vec<PathBuf>,
    /// Annotate the gold text with this model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Already-annotated file; repeat once per gold file.
    #[arg(long)]
    predicted: Vec<PathBuf>,
    /// Group label (e.g. classical, cross-genre); repeat once per gold file.
    #[arg(long)]
    group: Vec<String>,
    /// Source name for --model; unknown names use the generic id.
    #[arg(long)]
    source: Option<String>,
    /// Sidecar vectors for models trained with them; repeat once per gold
    /// file.
    #[arg(long)]
    vectors: Vec<PathBuf>,
    #[arg(long)]
    case_insensitive: bool,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain joined with ": ", skipping causes whose text the
/// previous message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if last.contains(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
        last = msg;
    }
    out
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Rules {
            config,
            top,
            allow_copy,
        } => cmd_rules(&config, top, allow_copy),
        Command::Train(args) => cmd_train(args),
        Command::Predict {
            model,
            input,
            source,
            vectors,
        } => cmd_predict(&model, &input, source.as_deref(), vectors.as_deref()),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate { run_file, out } => cmd_ablate(&run_file, out.as_deref()),
    }
}

fn emit(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush())
        .context("writing to stdout")?;
    Ok(())
}

fn read_document(path: &Path) -> anyhow::Result<Document> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    conllu::parse_bytes(&bytes).with_context(|| path.display().to_string())
}

fn cmd_rules(config: &Path, top: usize, allow_copy: bool) -> Result<()> {
    let map = SourceMap::from_json_file(config).map_err(anyhow::Error::from)?;
    let opts = LoadOptions {
        allow_copy,
        ..LoadOptions::default()
    };
    let ts = corpus::load_corpora(&map, &opts).map_err(anyhow::Error::from)?;
    let mut out = String::from("rule\tfrequency\texamples\n");
    for entry in ts.inventory.top(top) {
        let examples: Vec<String> = entry
            .examples
            .iter()
            .map(|(form, lemma)| format!("{form}→{lemma}"))
            .collect();
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            entry.name,
            entry.frequency,
            examples.join(" ")
        ));
    }
    emit(&out)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let defaults = Hyperparams::default();
    let hp = Hyperparams {
        epochs: args.epochs.unwrap_or(defaults.epochs),
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        seed: args.seed.unwrap_or(defaults.seed),
        dev_fraction: args.dev_fraction.unwrap_or(defaults.dev_fraction),
        dim: args.dim.unwrap_or(defaults.dim),
        allow_copy: args.allow_copy,
        ..defaults
    };
    let mut map = SourceMap::from_json_file(&args.config).map_err(anyhow::Error::from)?;
    if let Some(g) = args.granularity {
        map.granularity = g;
    }
    let opts = LoadOptions {
        allow_copy: hp.allow_copy,
        vectors: args.vectors,
        execution: Execution::default(),
    };
    let ts = corpus::load_corpora(&map, &opts).map_err(anyhow::Error::from)?;
    let outcome = match train::train(&ts, &hp) {
        Ok(o) => o,
        Err(train::TrainError::Hyperparams(msg)) => return Err(usage(msg)),
        Err(e) => return Err(anyhow!(e).into()),
    };
    for e in &outcome.epochs {
        eprintln!(
            "epoch {}\tloss {:.4}\tdev lemma {}\tdev upos {}",
            e.epoch,
            e.loss,
            e.dev_lemma.map_or("-".into(), |v| format!("{v:.2}")),
            e.dev_upos.map_or("-".into(), |v| format!("{v:.2}")),
        );
    }
    eprintln!("kept epoch {}", outcome.best_epoch);
    outcome
        .params
        .save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<ModelParams> {
    ModelParams::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn read_vectors(path: &Path) -> anyhow::Result<VectorFile> {
    Ok(corpus::read_vectors(path)?)
}

fn cmd_predict(
    model: &Path,
    input: &Path,
    source: Option<&str>,
    vectors: Option<&Path>,
) -> Result<()> {
    let params = load_model(model)?;
    let doc = read_document(input)?;
    let vectors = vectors.map(read_vectors).transpose()?;
    let id = params.sources.lookup(source);
    let out = annotate_document(&params, &doc, id, vectors.as_ref(), Execution::default())
        .map_err(anyhow::Error::from)?;
    emit(&serialize_document(&out))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let n = args.gold.len();
    if !args.group.is_empty() && args.group.len() != n {
        return Err(usage(format!(
            "{} --group labels for {n} gold files",
            args.group.len()
        )));
    }
    if !args.predicted.is_empty() && args.predicted.len() != n {
        return Err(usage(format!(
            "{} --predicted files for {n} gold files",
            args.predicted.len()
        )));
    }
    if !args.vectors.is_empty() && args.vectors.len() != n {
        return Err(usage(format!(
            "{} --vectors files for {n} gold files",
            args.vectors.len()
        )));
    }
    let opts = EvalOptions {
        case_insensitive: args.case_insensitive,
    };
    let model = args.model.as_deref().map(load_model).transpose()?;
    let mut report = EvalReport::default();
    for (i, gold_path) in args.gold.iter().enumerate() {
        let gold = read_document(gold_path)?;
        let name = gold_path.display().to_string();
        let mut score = match &model {
            Some(params) => {
                let vectors = args.vectors.get(i).map(|p| read_vectors(p)).transpose()?;
                let id = params.sources.lookup(args.source.as_deref());
                eval::evaluate(
                    params,
                    &name,
                    &gold,
                    id,
                    vectors.as_ref(),
                    opts,
                    Execution::default(),
                )
                .map_err(anyhow::Error::from)?
            }
            None => {
                let system = read_document(&args.predicted[i])?;
                score_documents(&name, &system, &gold, opts).map_err(anyhow::Error::from)?
            }
        };
        score.group = args.group.get(i).cloned();
        report.per_file.push(score);
    }
    emit(&format!("{}\n{}", report.to_tsv(), report.to_table()))
}

fn cmd_ablate(run_file: &Path, out: Option<&Path>) -> Result<()> {
    let file = match RunFile::from_json_file(run_file) {
        Ok(f) => f,
        Err(AblateError::NoRuns) => return Err(usage(format!("{}: no runs", run_file.display()))),
        Err(e) => return Err(anyhow!(e).into()),
    };
    let report = ablate::ablate(&file, EvalOptions::default(), Execution::default());
    let tsv = report.to_tsv();
    match out {
        Some(path) => {
            std::fs::write(path, &tsv)
                .with_context(|| format!("cannot write {}", path.display()))?;
            emit(&report.summary())?;
        }
        None => {
            emit(&tsv)?;
            eprint!("{}", report.summary());
        }
    }
    let failures: Vec<String> = report
        .failures()
        .map(|(name, e)| format!("{name}: {e}"))
        .collect();
    if !failures.is_empty() {
        return Err(anyhow!(
            "{} run(s) failed:\n  {}",
            failures.len(),
            failures.join("\n  ")
        )
        .into());
    }
    Ok(())
}
