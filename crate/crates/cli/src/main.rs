use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use ddi_cli::config::{Overrides, PipelineConfig};
use ddi_cli::stages::{self, Context};
use ddi_cli::synth;

#[derive(Parser)]
#[command(name = "ddi", version, about = "Drug-drug interaction screening from literature abstracts")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, short, global = true, default_value = "ddi.toml")]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory in the config file.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and tokenize the corpus, tagging drug mentions.
    Ingest,
    /// Keep abstracts that mention a lexicon drug.
    Filter,
    /// Enumerate cardiac-drug pairs and label them from the catalog.
    Label,
    /// Split samples and abstracts into train/dev/test without leakage.
    Split,
    /// Compare the split against naive abstract assignment.
    DiagnoseSplit,
    /// Build per-split feature matrices.
    Featurize,
    /// Fit the model, choosing the L1 penalty by cross-validation.
    Train,
    /// Score every split and report metrics and ROC curves.
    Evaluate,
    /// Flag overlapping exposures to interacting drugs in a MAR file.
    Alerts,
    /// Run every stage in order.
    All,
    /// Write a small synthetic corpus with a ready-to-run config.
    GenSynthetic {
        /// Directory to write into.
        dir: PathBuf,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_target(false)
        .with_writer(std::io::stderr)
        .init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    if let Command::GenSynthetic { dir } = &cli.command {
        synth::write_mini(dir, cli.seed.unwrap_or(7))?;
        println!("wrote synthetic corpus to {}", dir.display());
        return Ok(());
    }
    let overrides = Overrides {
        seed: cli.seed,
        output: cli.output.clone(),
    };
    let cfg = PipelineConfig::load(&cli.config, &overrides)?;
    cfg.validate()?;
    let ctx = Context::new(&cfg);
    match cli.command {
        Command::Ingest => stages::run_stage(&ctx, "ingest"),
        Command::Filter => stages::run_stage(&ctx, "filter"),
        Command::Label => stages::run_stage(&ctx, "label"),
        Command::Split => stages::run_stage(&ctx, "split"),
        Command::DiagnoseSplit => {
            let text = stages::diagnose_split(&ctx)?;
            print!("{text}");
            Ok(())
        }
        Command::Featurize => stages::run_stage(&ctx, "featurize"),
        Command::Train => stages::run_stage(&ctx, "train"),
        Command::Evaluate => stages::run_stage(&ctx, "evaluate"),
        Command::Alerts => {
            let text = stages::alerts(&ctx)?;
            print!("{text}");
            Ok(())
        }
        Command::All => stages::run_all(&ctx),
        Command::GenSynthetic { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
