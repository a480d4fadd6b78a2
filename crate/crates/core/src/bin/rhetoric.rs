//! Command-line front door for the corpus-analytics pipeline.
//!
//! Every pipeline command takes `--config <file>` plus a handful of
//! overriding flags; precedence is config file < `RHETORIC_SERVER`
//! environment variable < flags. Commands print the artifacts they wrote,
//! one per line, and exit non-zero with the failing stage or field named
//! on any error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rhetoric::config::BackendConfig;
use rhetoric::error::{Error, Result};
use rhetoric::lexicon::{
    aggregate_votes, expand_seeds, fleiss_kappa, majority_class_table, AnnotationMatrix,
    EmbeddingTable, Lexicon, SeedAggregation,
};
use rhetoric::pipeline::Pipeline;
use rhetoric::RunConfig;

#[derive(Parser)]
#[command(name = "rhetoric", version, about = "Speaker-uniqueness and divisive-language analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read raw transcripts into per-genre corpus artifacts.
    Ingest(PipelineArgs),
    /// Apply opponent-mention rules and emit the manual review queue.
    Tag(PipelineArgs),
    /// Train the n-gram scoring model per genre.
    Train(PipelineArgs),
    /// Score sentence uniqueness under speaker-prompt substitution.
    Score(PipelineArgs),
    /// Build and inspect divisive-term lexicons.
    Lexicon {
        #[command(subcommand)]
        action: LexiconAction,
    },
    /// Compute mention-association z-scores and the overlap metric.
    Fw(PipelineArgs),
    /// Emit every per-figure report CSV.
    Report(PipelineArgs),
    /// Run all stages in order.
    Run(PipelineArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Run-configuration JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the worker-thread count.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the seed for randomized steps.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scoring context window (tokens).
    #[arg(long)]
    window_tokens: Option<usize>,
    /// Override the remote loss server URL (also: RHETORIC_SERVER).
    #[arg(long)]
    server_url: Option<String>,
}

impl PipelineArgs {
    /// File, then environment, then flags; validated once at the end.
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::parse_file(&self.config)?;
        config.apply_env();
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(jobs) = self.jobs {
            config.jobs = jobs;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(window) = self.window_tokens {
            config.window_tokens = window;
        }
        if let Some(url) = &self.server_url {
            if let BackendConfig::Remote { server_url, .. } = &mut config.backend {
                *server_url = url.clone();
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    /// Best cosine against any single seed.
    Max,
    /// Mean cosine over all seeds.
    Mean,
}

impl From<AggregationArg> for SeedAggregation {
    fn from(a: AggregationArg) -> SeedAggregation {
        match a {
            AggregationArg::Max => SeedAggregation::Max,
            AggregationArg::Mean => SeedAggregation::Mean,
        }
    }
}

#[derive(Subcommand)]
enum LexiconAction {
    /// Rank nearest-neighbour candidate terms for a seed list.
    Expand {
        /// Whitespace-separated embedding table (`term v1 … vd` lines).
        #[arg(long)]
        embeddings: PathBuf,
        /// Seed terms, one per line.
        #[arg(long)]
        seeds: PathBuf,
        /// Number of candidates to keep.
        #[arg(short, long, default_value_t = 200)]
        k: usize,
        #[arg(long, value_enum, default_value_t = AggregationArg::Max)]
        aggregation: AggregationArg,
        /// Write candidates here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Majority-vote an annotation matrix into a lexicon.
    Aggregate {
        /// Annotation CSV: `term,<rater>,…` with 0/1 cells.
        #[arg(long)]
        votes: PathBuf,
        /// Terms to mark as seeds in the output, one per line.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Write the lexicon here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parse a lexicon file (or the bundled one) and print a summary.
    Validate {
        /// Lexicon file; the bundled lexicon when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

fn read_terms(path: &PathBuf) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(Error::read(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.trim_end_matches('*').trim().to_string())
        .collect())
}

fn write_lines(lines: &[String], output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => {
            let mut text = lines.join("\n");
            text.push('\n');
            std::fs::write(path, text).map_err(Error::write(path))?;
            println!("{}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for line in lines {
                writeln!(out, "{line}").map_err(|e| Error::Write {
                    path: "<stdout>".into(),
                    source: e,
                })?;
            }
        }
    }
    Ok(())
}

fn run_lexicon(action: LexiconAction) -> Result<()> {
    match action {
        LexiconAction::Expand { embeddings, seeds, k, aggregation, output } => {
            let table = EmbeddingTable::load(&embeddings)?;
            let seed_terms = read_terms(&seeds)?;
            let candidates = expand_seeds(&table, &seed_terms, k, aggregation.into())?;
            write_lines(&candidates, output.as_ref())
        }
        LexiconAction::Aggregate { votes, seeds, output } => {
            let matrix = AnnotationMatrix::load(&votes)?;
            let lexicon = aggregate_votes(&matrix);
            let seed_terms = match &seeds {
                Some(path) => read_terms(path)?,
                None => Vec::new(),
            };
            let lexicon = Lexicon::from_terms(
                lexicon.terms().map(str::to_string),
                seed_terms,
            );
            eprintln!("items: {}", matrix.items().len());
            eprintln!("accepted: {}", lexicon.entries().len());
            eprintln!("fleiss_kappa: {}", fleiss_kappa(&matrix));
            for (majority, percent) in majority_class_table(&matrix) {
                eprintln!("majority_{majority}: {percent}%");
            }
            match output {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(Error::write(&path))?;
                    lexicon.emit(std::io::BufWriter::new(file))?;
                    println!("{}", path.display());
                    Ok(())
                }
                None => lexicon.emit(std::io::stdout().lock()),
            }
        }
        LexiconAction::Validate { lexicon } => {
            let loaded;
            let lexicon = match &lexicon {
                Some(path) => {
                    loaded = Lexicon::load(path)?;
                    &loaded
                }
                None => Lexicon::bundled(),
            };
            println!("terms: {}", lexicon.entries().len());
            println!("seeds: {}", lexicon.seeds().count());
            Ok(())
        }
    }
}

fn run_stage(args: &PipelineArgs, stage: fn(&Pipeline) -> Result<Vec<PathBuf>>) -> Result<()> {
    let pipeline = Pipeline::new(args.resolve()?)?;
    for path in stage(&pipeline)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => run_stage(&args, Pipeline::ingest),
        Command::Tag(args) => run_stage(&args, Pipeline::tag),
        Command::Train(args) => run_stage(&args, Pipeline::train),
        Command::Score(args) => run_stage(&args, Pipeline::score),
        Command::Lexicon { action } => run_lexicon(action),
        Command::Fw(args) => run_stage(&args, Pipeline::fw),
        Command::Report(args) => run_stage(&args, Pipeline::report),
        Command::Run(args) => run_stage(&args, Pipeline::run_all),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
