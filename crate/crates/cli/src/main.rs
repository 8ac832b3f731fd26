//! Command-line surface for the table retrieval pipeline.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigFile, Overrides, PipelineConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "tabret",
    about = "Build question-augmented table corpora and evaluate table retrieval",
    version
)]
struct Cli {
    /// Pipeline configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read the raw corpus into table records.
    Ingest,
    /// Reconstruct the corpus: schema-based dedup plus gold-id remapping.
    Dedup,
    /// Generate questions/headers/descriptions and build augmented tables.
    Augment,
    /// Embed the augmented corpus into the vector store.
    Embed,
    /// Build the IVF index over the vector store.
    Index,
    /// Query the index and print `rank id score` lines.
    Search {
        #[arg(long)]
        query: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
    /// Score retrieval with Recall@k and write the report.
    Eval,
    /// Run every stage in order (eval included when queries are configured).
    Pipeline,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::new("config", "--config <file> is required"))?;
    let mut file = ConfigFile::load(path)?;
    file.apply(&cli.overrides);
    file.resolve()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Ingest => commands::cmd_ingest(&cfg),
        Command::Dedup => commands::cmd_dedup(&cfg),
        Command::Augment => commands::cmd_augment(&cfg),
        Command::Embed => commands::cmd_embed(&cfg),
        Command::Index => commands::cmd_index(&cfg),
        Command::Search { query, k } => commands::cmd_search(&cfg, query, *k),
        Command::Eval => commands::cmd_eval(&cfg),
        Command::Pipeline => commands::cmd_pipeline(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::FAILURE
        }
    }
}
