//! `themes`: detect themes in a tagged question corpus and score them as a
//! tag classifier.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use theme_core::pipeline::{
    compare_runs, run_grid, run_pipeline, PipelineError, RunConfig, RunManifest, RunOptions, RunOutcome, Stage,
    MANIFEST_FILE,
};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "themes", version, about = "Cluster short texts into themes and evaluate them against tags")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the corpus, filter tags and write the train/test split.
    Ingest(StageArgs),
    /// Reduce each question to its first sentences or SRL parses.
    Represent(StageArgs),
    /// Turn every unit into a normalized vector.
    Encode(StageArgs),
    /// Fit the clustering model on the training vectors.
    Cluster(StageArgs),
    /// Predict test tags from the clusters and write the reports.
    Evaluate(StageArgs),
    /// Run every stage, or up to `--stage`.
    Run {
        #[command(flatten)]
        args: StageArgs,
        /// Last stage to execute.
        #[arg(long, value_name = "NAME", default_value = "evaluate")]
        stage: Stage,
        /// Sweep max_n 1..=5 with both clusterers and write a comparison.
        #[arg(long, conflicts_with = "stage")]
        grid: bool,
    },
    /// Rank finished runs that share a train/test split.
    Compare {
        /// Manifest files or run directories containing one.
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for artifacts, manifest and cache.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Replaces both the split and the clustering seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
    /// Cache directory shared between runs (default: OUT/cache).
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
}

impl StageArgs {
    fn load(&self) -> Result<(RunConfig, RunOptions), PipelineError> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.override_seed(seed);
        }
        let options = RunOptions {
            cache_dir: self.cache.clone(),
            workers: self.workers.map(usize::from),
            ..RunOptions::new(&self.out)
        };
        Ok((config, options))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage mistakes are configuration errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("THEMES_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();

    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Ingest(args) => single(&args, Stage::Ingest),
        Command::Represent(args) => single(&args, Stage::Represent),
        Command::Encode(args) => single(&args, Stage::Encode),
        Command::Cluster(args) => single(&args, Stage::Cluster),
        Command::Evaluate(args) => single(&args, Stage::Evaluate),
        Command::Run { args, stage, grid: false } => single(&args, stage),
        Command::Run { args, grid: true, .. } => {
            let (config, options) = args.load()?;
            let outcomes = run_grid(&config, &options)?;
            let manifests: Vec<RunManifest> = outcomes.into_iter().map(|o| o.manifest).collect();
            print!("{}", compare_runs(&manifests)?.render_text());
            println!("wrote {}", options.out_dir.join("comparison.txt").display());
            Ok(())
        }
        Command::Compare { runs, csv } => {
            let manifests = runs.iter().map(|p| RunManifest::load(&manifest_path(p))).collect::<Result<Vec<_>, _>>()?;
            let table = compare_runs(&manifests)?;
            print!("{}", table.render_text());
            if let Some(path) = csv {
                fs::write(&path, table.to_csv()).map_err(|e| PipelineError::Io { path, source: e })?;
            }
            Ok(())
        }
    }
}

fn single(args: &StageArgs, stop_after: Stage) -> Result<(), PipelineError> {
    let (config, options) = args.load()?;
    let outcome = run_pipeline(&config, &RunOptions { stop_after, ..options })?;
    summarize(&outcome);
    Ok(())
}

fn summarize(outcome: &RunOutcome) {
    for t in &outcome.log.timings {
        let origin = if t.cache_hit { "cached" } else { "computed" };
        println!("{:<10} {origin:<8} {:>7} ms", t.stage, t.millis);
    }
    if let Some(report) = &outcome.report {
        println!(
            "micro_f1 {:.4} ({} of {} correct, {} abstained)",
            report.micro_f1, report.correct, report.questions, report.abstained
        );
    }
    println!("manifest {}", outcome.out_dir.join(MANIFEST_FILE).display());
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}
