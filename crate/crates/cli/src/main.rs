mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use convoforge::diversity::UserConvoDiversity;
use convoforge::fighting_words::{fit_fw, summarize_fw, FwConfig, Prior};
use convoforge::filter::parse_filter;
use convoforge::hyperconvo::HyperConvo;
use convoforge::io::{export_tabular, load, load_unchecked, save};
use convoforge::politeness::{summarize_politeness, PolitenessLexicon, PolitenessStrategies};
use convoforge::registry::build_pipeline;
use convoforge::text::{TextCleaner, TOKENS_KEY};
use convoforge::transform::format_sig;
use convoforge::{Corpus, Error, SummaryTable, Transformer, TraversalOrder};

use crate::config::PipelineConfig;

#[derive(Parser)]
#[command(name = "convoforge", version, about = "Analyze conversational corpora")]
struct Cli {
    /// Corpus directory, used when a command is not given one explicitly.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Reserved; every algorithm is currently deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus directory against the reply-tree invariants.
    Validate { path: Option<PathBuf> },
    /// Print object counts and mean conversation depth and size.
    Stats { path: Option<PathBuf> },
    /// Execute a pipeline config file.
    Run { config: PathBuf },
    /// Compare the vocabulary of two utterance classes.
    Fightingwords {
        path: Option<PathBuf>,
        /// Filter expression selecting class 1, e.g. `mixed=true`.
        #[arg(long)]
        class1: String,
        #[arg(long)]
        class2: String,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Write the full ranking as a TSV file (term, y1, y2, zscore).
        #[arg(long)]
        export: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        ngram_max: usize,
    },
    /// Count politeness strategies and print their means.
    Politeness {
        path: Option<PathBuf>,
        /// Average only over utterances matching this filter.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Save the annotated corpus here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Extract reply-structure features per conversation.
    Hyperconvo {
        path: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score each speaker's linguistic diversity across conversations.
    Diversity {
        path: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_tokens: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write utterances as a delimited table.
    Export {
        path: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
        /// Destination file; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Csv,
}

/// Failure with its exit code.
enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e.root() {
            Error::Io { .. }
            | Error::MissingFile(_)
            | Error::MalformedRecord { .. }
            | Error::CountMismatch { .. }
            | Error::UnsupportedVersion(_)
            | Error::MissingColumn(_)
            | Error::Json(_)
            | Error::InvalidConfig(_)
            | Error::InvalidFilter { .. } => Failure::Usage(message),
            _ => Failure::Domain(message),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

type Outcome = std::result::Result<ExitCode, Failure>;

fn corpus_path(
    explicit: Option<PathBuf>,
    global: &Option<PathBuf>,
) -> std::result::Result<PathBuf, Failure> {
    explicit
        .or_else(|| global.clone())
        .ok_or_else(|| Failure::Usage("no corpus directory given (pass a path or --corpus)".into()))
}

fn print(text: &str) -> Outcome {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Usage(format!("stdout: {e}")))?;
    Ok(ExitCode::SUCCESS)
}

fn print_table(t: &SummaryTable) -> Outcome {
    print(&t.render('\t'))
}

fn ensure_tokens(corpus: &mut Corpus) -> convoforge::Result<()> {
    if corpus
        .utterances()
        .any(|u| u.meta.get(TOKENS_KEY).is_none())
    {
        log::info!("corpus lacks tokens; running text_clean first");
        TextCleaner::default().transform(corpus)?;
    }
    Ok(())
}

fn maybe_save(corpus: &Corpus, output: Option<PathBuf>) -> convoforge::Result<()> {
    match output {
        Some(dir) => save(corpus, dir),
        None => Ok(()),
    }
}

fn validate(path: &Path) -> Outcome {
    let corpus = load_unchecked(path)?;
    let report = corpus.check_integrity();
    if report.is_empty() {
        print(&format!(
            "ok\t{} utterances\t{} conversations\t{} speakers\n",
            corpus.utterance_count(),
            corpus.conversation_count(),
            corpus.speaker_count()
        ))
    } else {
        let text: String = report.violations.iter().map(|v| format!("{v}\n")).collect();
        print(&text)?;
        Ok(ExitCode::from(1))
    }
}

fn stats(path: &Path) -> Outcome {
    let corpus = load(path)?;
    let n = corpus.conversation_count().max(1) as f64;
    let mut depth = 0usize;
    let mut size = 0usize;
    for c in corpus.conversations() {
        depth += corpus.depth(c.id())?;
        size += corpus.traverse(c.id(), TraversalOrder::Bfs)?.len();
    }
    let mut t = SummaryTable::new("statistic", &["value"]);
    t.push_row("speakers", vec![corpus.speaker_count().into()]);
    t.push_row("conversations", vec![corpus.conversation_count().into()]);
    t.push_row("utterances", vec![corpus.utterance_count().into()]);
    t.push_row("mean_depth", vec![(depth as f64 / n).into()]);
    t.push_row("mean_size", vec![(size as f64 / n).into()]);
    print_table(&t)
}

fn run(config_path: &Path, global: &Option<PathBuf>) -> Outcome {
    let (config, base) = PipelineConfig::load(config_path)?;
    let input = match config.input {
        Some(p) => base.join(p),
        None => corpus_path(None, global)?,
    };
    let mut pipeline = build_pipeline(&config.stages, &base)?;
    let mut corpus = load(&input)?;
    pipeline.run(&mut corpus, true)?;
    save(&corpus, base.join(&config.output))?;
    log::info!("wrote {}", base.join(&config.output).display());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn fightingwords(
    path: &Path,
    class1: &str,
    class2: &str,
    top_k: usize,
    export: Option<PathBuf>,
    alpha: f64,
    ngram_max: usize,
) -> Outcome {
    let (c1, c2) = (parse_filter(class1)?, parse_filter(class2)?);
    let corpus = load(path)?;
    let config = FwConfig {
        ngram_max,
        prior: Prior::Uniform(alpha),
        ..FwConfig::default()
    };
    let model = fit_fw::<f64>(&corpus, c1.as_ref(), c2.as_ref(), &config)?;
    if let Some(file) = export {
        let f = File::create(&file).map_err(|e| io_failure(&file, e))?;
        let mut w = BufWriter::new(f);
        let mut body = String::from("term\ty1\ty2\tzscore\n");
        for (term, y1, y2, z) in model.export_rows() {
            body.push_str(&format!("{term}\t{y1}\t{y2}\t{}\n", format_sig(z)));
        }
        w.write_all(body.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| io_failure(&file, e))?;
    }
    print_table(&summarize_fw(&model, top_k))
}

fn politeness(
    path: &Path,
    filter: Option<String>,
    lexicon: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Outcome {
    let selector = filter.as_deref().map(parse_filter).transpose()?;
    let lexicon = match lexicon {
        Some(p) => PolitenessLexicon::from_file(p)?,
        None => PolitenessLexicon::builtin(),
    };
    let mut corpus = load(path)?;
    ensure_tokens(&mut corpus)?;
    let stage = PolitenessStrategies::new(lexicon);
    stage.transform(&mut corpus)?;
    let table = match &selector {
        Some(s) => summarize_politeness(stage.lexicon(), &corpus, s.as_ref())?,
        None => stage.summarize(&corpus)?,
    };
    maybe_save(&corpus, output)?;
    print_table(&table)
}

fn annotate_and_summarize(
    path: &Path,
    stage: &dyn Transformer,
    tokens: bool,
    output: Option<PathBuf>,
) -> Outcome {
    let mut corpus = load(path)?;
    if tokens {
        ensure_tokens(&mut corpus)?;
    }
    stage.transform(&mut corpus)?;
    let table = stage.summarize(&corpus)?;
    maybe_save(&corpus, output)?;
    print_table(&table)
}

fn export(path: &Path, format: Format, output: Option<PathBuf>) -> Outcome {
    let corpus = load(path)?;
    let delimiter = match format {
        Format::Tsv => '\t',
        Format::Csv => ',',
    };
    match output {
        Some(file) => {
            let f = File::create(&file).map_err(|e| io_failure(&file, e))?;
            export_tabular(&corpus, BufWriter::new(f), delimiter)?;
        }
        None => export_tabular(&corpus, io::stdout().lock(), delimiter)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Outcome {
    let global = cli.corpus;
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} accepted; no command uses randomness");
    }
    match cli.command {
        Command::Validate { path } => validate(&corpus_path(path, &global)?),
        Command::Stats { path } => stats(&corpus_path(path, &global)?),
        Command::Run { config } => run(&config, &global),
        Command::Fightingwords {
            path,
            class1,
            class2,
            top_k,
            export,
            alpha,
            ngram_max,
        } => fightingwords(
            &corpus_path(path, &global)?,
            &class1,
            &class2,
            top_k,
            export,
            alpha,
            ngram_max,
        ),
        Command::Politeness {
            path,
            filter,
            lexicon,
            output,
        } => politeness(&corpus_path(path, &global)?, filter, lexicon, output),
        Command::Hyperconvo { path, output } => {
            annotate_and_summarize(&corpus_path(path, &global)?, &HyperConvo, false, output)
        }
        Command::Diversity {
            path,
            min_tokens,
            output,
        } => {
            let stage = UserConvoDiversity {
                min_tokens_per_convo: min_tokens,
                ..UserConvoDiversity::default()
            };
            annotate_and_summarize(&corpus_path(path, &global)?, &stage, true, output)
        }
        Command::Export {
            path,
            format,
            output,
        } => export(&corpus_path(path, &global)?, format, output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
