use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use termsim::config::RunConfig;
use termsim::synth::{self, SynthSpec};
use termsim::{pipeline, Result};

#[derive(Parser)]
#[command(
    name = "termsim",
    version,
    about = "Hybrid term-index retrieval: tokenizer and encoder training, index building, search, evaluation"
)]
struct Cli {
    /// Configuration file (sectioned key = value text).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Override one configuration entry; repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured tokenizer and write the vocabulary artifact.
    TrainTokenizer,
    /// Train the embedding model against the vocabulary artifact.
    TrainEncoder,
    /// Build the thresholded term index from the model artifact.
    BuildIndex,
    /// Retrieve products for one query and print the ranked listing.
    Search {
        /// Query text.
        #[arg(long)]
        query: String,
        /// Number of results to print.
        #[arg(long, default_value_t = 12)]
        top_k: usize,
    },
    /// Score retrieval against the judgments and write metric reports.
    Evaluate,
    /// Run the full pipeline over the configured grid of
    /// tokenizer x brand-terms x dimension x model variant.
    Ablate,
    /// Generate a synthetic dataset with the standard file layout.
    GenCorpus {
        /// Output directory for products.tsv, queries.tsv, labels.tsv, brands.txt.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        products: usize,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[arg(long, default_value_t = 5000)]
        labels: usize,
        /// Use the full published dataset shape (42,994 / 480 / 233,448).
        #[arg(long, conflicts_with_all = ["products", "queries", "labels"])]
        full_scale: bool,
    },
    /// List capitalized two-word phrases from a product file, most frequent
    /// first, as brand-list candidates.
    SuggestBrands {
        #[arg(long)]
        products: PathBuf,
        #[arg(long, default_value_t = 3)]
        min_count: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus { dir, products, queries, labels, full_scale } => {
            let seed = cli.seed.unwrap_or(0);
            let spec = if full_scale {
                SynthSpec::full_scale(seed)
            } else {
                SynthSpec { products, queries, labels, seed }
            };
            let paths = synth::generate(&spec, &dir)?;
            for p in [paths.products, paths.queries, paths.labels, paths.brands] {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::SuggestBrands { products, min_count } => {
            for (brand, count) in synth::suggest_brands(&products, min_count)? {
                println!("{brand}\t{count}");
            }
            Ok(())
        }
        command => {
            let cfg = RunConfig::load(cli.config.as_deref(), &cli.set, cli.seed)?;
            match command {
                Command::TrainTokenizer => pipeline::cmd_train_tokenizer(&cfg, cli.verbose),
                Command::TrainEncoder => pipeline::cmd_train_encoder(&cfg, cli.verbose),
                Command::BuildIndex => pipeline::cmd_build_index(&cfg, cli.verbose),
                Command::Search { query, top_k } => {
                    pipeline::cmd_search(&cfg, &query, top_k, cli.verbose)
                }
                Command::Evaluate => pipeline::cmd_evaluate(&cfg, cli.verbose),
                Command::Ablate => pipeline::cmd_ablate(&cfg, cli.verbose),
                Command::GenCorpus { .. } | Command::SuggestBrands { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
