use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use codemix::data::TRAIN_BATCHES;
use codemix::synth::SynthLanguage;
use codemix::taggers::Method;
use codemix_cli::commands::{self, Ctx, Level};
use codemix_cli::{CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "codemix", version, about = "Word-level language tagging for Romanized code-mixed text")]
struct Cli {
    /// Flat key = value config file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic words for offline experiments.
    Synth {
        #[arg(long)]
        lang: SynthLanguage,
        #[arg(long, default_value_t = 6000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample and split two word lists into train/dev/test parts.
    Prepare {
        #[arg(long)]
        wordlist0: PathBuf,
        #[arg(long)]
        wordlist1: PathBuf,
    },
    /// Generate augmented training data for one batch.
    Augment {
        #[arg(long)]
        batch: usize,
    },
    /// Train one tagger on one batch.
    Train {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        batch: usize,
    },
    /// Combine trained taggers into a weighted-vote ensemble.
    Ensemble {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        /// Labeled file to weight members by; defaults to their dev accuracy.
        #[arg(long)]
        accuracy_data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a results table for trained models.
    Eval {
        #[arg(long, default_value = "token")]
        level: Level,
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        /// Labeled tokens or an instance file; defaults to the test split.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tag tokens read one per line from stdin.
    Tag {
        #[arg(long)]
        model: PathBuf,
    },
    /// Augment, train, ensemble and evaluate every requested batch.
    Run {
        #[arg(long, value_delimiter = ',', default_values_t = 0..TRAIN_BATCHES)]
        batches: Vec<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> CliResult<()> {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let ctx = || -> CliResult<Ctx> { Ok(Ctx::new(ExperimentConfig::load(cli.config.as_deref())?, argv.clone())) };
    match &cli.command {
        Command::Synth { lang, count, seed, out } => commands::synth(*lang, *count, *seed, out),
        Command::Prepare { wordlist0, wordlist1 } => {
            for f in commands::prepare(&ctx()?, wordlist0, wordlist1)? {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Augment { batch } => {
            for f in commands::augment(&ctx()?, *batch)? {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Train { method, batch } => {
            println!("{}", commands::train(&ctx()?, *method, *batch)?.display());
            Ok(())
        }
        Command::Ensemble { models, accuracy_data, out } => {
            let e = commands::ensemble(&ctx()?, models, accuracy_data.as_deref(), out)?;
            for (m, w) in e.members.iter().zip(&e.weights) {
                println!("{}\t{w:.6}", m.method);
            }
            Ok(())
        }
        Command::Eval { level, models, data, out } => {
            let rows = commands::eval(&ctx()?, *level, models, data.as_deref(), out.as_deref())?;
            if out.is_none() {
                codemix::ensemble::write_results_tsv(io::stdout().lock(), &rows)?;
            }
            Ok(())
        }
        Command::Tag { model } => commands::tag(model, io::stdin().lock(), BufWriter::new(io::stdout().lock())),
        Command::Run { batches } => {
            println!("{}", commands::run(&ctx()?, batches)?.display());
            Ok(())
        }
    }
}
