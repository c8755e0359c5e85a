use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod io;
mod pipeline;

/// Fine-grained Chinese toxic language toolkit.
#[derive(Parser, Debug)]
#[command(name = "toxicn", version, about)]
struct Cli {
    /// Directory holding lexicon.tsv, pinyin.tsv and glyph.tsv. Missing
    /// files fall back to the built-in tables. Overrides TOXICN_RESOURCES.
    #[arg(long, global = true)]
    resources: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean raw comments, drop brief ones and exact duplicates
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Minimum content characters for a comment to be kept
        #[arg(long, default_value_t = 4)]
        min_chars: usize,
        /// File of record ids to drop (one per line)
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        keep_mentions: bool,
        #[arg(long)]
        keep_urls: bool,
    },
    /// List lexicon matches per record
    Match {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate insult variants of a term
    Derive {
        #[arg(long)]
        term: String,
        /// homophonic, abbreviation, code_mixing, deformation, detect or all
        #[arg(long, default_value = "all")]
        rule: String,
    },
    /// Lexicon pseudo-labeling with reviewed lexicon growth
    Pseudolabel {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        /// Reviewed terms: bare terms or full lexicon rows
        #[arg(long)]
        accept: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Candidate terms of the final round (TSV)
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the grown lexicon here
        #[arg(long)]
        lexicon_out: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        min_freq: usize,
        #[arg(long, default_value_t = 3.0)]
        min_score: f64,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
    },
    /// Check every record against the label hierarchy
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Corpus statistics per topic, platform and group
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Shuffle-split a corpus into train and test files
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
        /// Train share: 8:2, 4/5 or 0.8
        #[arg(long, default_value = "8:2")]
        ratio: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        stratify: bool,
    },
    /// Train a classifier for one subtask
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// key=value settings; flags take precedence
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a trained model on a labeled corpus
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// JSON report path
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        configs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fleiss' kappa of a ratings table
    Kappa {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Full chain with a seed loop and mean/s.d. summary
    Pipeline(pipeline::PipelineArgs),
}

/// Model settings that can be given as flags.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// toxic, type, group or expression
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub pad_len: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Drop the category table entirely
    #[arg(long)]
    pub ablate_tke: bool,
}

/// Bad invocation detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A verification step ran but its result is out of tolerance.
#[derive(Debug)]
pub struct CheckFailure(pub String);

impl std::fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailure {}

fn run(cli: Cli) -> anyhow::Result<()> {
    let res = io::ResourceDir::locate(cli.resources);
    match cli.command {
        Command::Normalize {
            input,
            out,
            min_chars,
            exclude,
            keep_mentions,
            keep_urls,
        } => commands::normalize(&input, &out, min_chars, exclude.as_deref(), keep_mentions, keep_urls),
        Command::Match { lexicon, input, out } => commands::match_lexicon(&res, lexicon.as_deref(), &input, &out),
        Command::Derive { term, rule } => commands::derive(&res, &term, &rule),
        Command::Pseudolabel {
            lexicon,
            input,
            accept,
            out,
            report,
            lexicon_out,
            min_freq,
            min_score,
            max_n,
        } => commands::pseudolabel(
            &res,
            commands::PseudoPaths {
                lexicon: lexicon.as_deref(),
                input: &input,
                accept: accept.as_deref(),
                out: &out,
                report: report.as_deref(),
                lexicon_out: lexicon_out.as_deref(),
            },
            toxicn_core::pseudo::CandidateParams { min_freq, min_score, max_n },
        ),
        Command::Validate { input } => commands::validate(&input),
        Command::Stats { input, json } => commands::stats(&input, json.as_deref()),
        Command::Split {
            input,
            train_out,
            test_out,
            ratio,
            seed,
            stratify,
        } => commands::split(&input, &train_out, &test_out, &ratio, seed, stratify),
        Command::Train {
            train,
            lexicon,
            config,
            out,
            model,
        } => commands::train(&res, &train, lexicon.as_deref(), config.as_deref(), &out, &model),
        Command::Eval { model, test, report } => commands::eval(&model, &test, report.as_deref()),
        Command::Gradcheck { configs, seed } => commands::gradcheck(configs, seed),
        Command::Kappa { input } => commands::kappa(&input),
        Command::Pipeline(args) => pipeline::run(&res, &args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else if e.downcast_ref::<CheckFailure>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
