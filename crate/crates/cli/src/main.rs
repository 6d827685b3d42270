use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evidence_core::synthetic::SyntheticConfig;
use evidence_pipeline::manifest::write_atomic;
use evidence_pipeline::study::{run_study, StudySettings};
use evidence_pipeline::{open_pipeline, write_synthetic, PipelineError, Stage};

#[derive(Debug, Parser)]
#[command(name = "evidence-pipeline", version, about = "Two-stage evidence retrieval experiments")]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-query work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate inputs and copy them into the output directory.
    Ingest,
    /// Build the BM25 index.
    Index,
    /// BM25 runs for the evaluated splits.
    SparseRetrieve,
    /// BM25 hard negatives for the training queries.
    MineNegatives,
    /// Train the toy encoder.
    TrainToy,
    /// Embed documents and evaluated queries.
    Embed,
    /// Dense runs for the evaluated splits.
    DenseRetrieve,
    /// Re-rank the head of a first-stage run.
    Rerank,
    /// Metric reports for every configured run.
    Evaluate,
    /// Paired significance tests for the configured run pairs.
    Compare,
    /// Rank histogram and query length CSVs.
    ExportPlots,
    /// Every stage in order.
    All,
    /// Write a seeded synthetic collection.
    GenerateSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Tiny)]
        preset: Preset,
    },
    /// Compare untrained, in-batch and hard-negative toy encoders on the
    /// synthetic collection.
    ToyStudy {
        /// Training seeds, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// 20 documents.
    Tiny,
    /// 200 documents, 800 queries.
    Default,
}

fn stage_of(command: &Command) -> Option<Stage> {
    Some(match command {
        Command::Ingest => Stage::Ingest,
        Command::Index => Stage::Index,
        Command::SparseRetrieve => Stage::SparseRetrieve,
        Command::MineNegatives => Stage::MineNegatives,
        Command::TrainToy => Stage::TrainToy,
        Command::Embed => Stage::Embed,
        Command::DenseRetrieve => Stage::DenseRetrieve,
        Command::Rerank => Stage::Rerank,
        Command::Evaluate => Stage::Evaluate,
        Command::Compare => Stage::Compare,
        Command::ExportPlots => Stage::ExportPlots,
        _ => return None,
    })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(PipelineError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| PipelineError::Invariant(e.to_string()))?;
    }
    match &cli.command {
        Command::GenerateSynthetic { out, preset } => {
            let mut config = match preset {
                Preset::Tiny => SyntheticConfig::tiny(),
                Preset::Default => SyntheticConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            write_synthetic(out, &config)
        }
        Command::ToyStudy { seeds, out } => {
            let mut settings = StudySettings::default();
            if let Some(seeds) = seeds {
                settings.seeds = seeds.clone();
            }
            let report = run_study(&settings)?;
            print!("{}", report.to_text());
            if let Some(path) = out {
                let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
                json.push(b'\n');
                write_atomic(path, &json)?;
            }
            Ok(())
        }
        command => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| PipelineError::Config("--config is required for pipeline stages".into()))?;
            let pipeline = open_pipeline(path, cli.seed)?;
            match stage_of(command) {
                Some(stage) => pipeline.run(stage).map(|_| ()),
                None => pipeline.run_all().map(|_| ()),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
