use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use horn_embed::pipeline::{ablate, ExperimentConfig, Run};
use horn_embed::{Error, Result};

/// Environment variable naming the output directory.
const OUT_ENV: &str = "HORN_EMBED_OUT";

#[derive(Parser)]
#[command(
    name = "horn-embed",
    version,
    about = "Embed Horn-logic atoms and guide a backward-chaining reasoner with them",
    after_help = "Exit codes: 0 success, 2 configuration, 3 parse, 4 vocabulary or \
                  encoding, 5 generation, 6 non-finite loss, 7 missing or mismatched \
                  artifact, 8 contract violation, 9 I/O."
)]
struct Cli {
    /// Worker threads for query- and batch-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Starting preset: kb250, kb375, kb500 or desk.
    #[arg(long, default_value = "desk")]
    preset: String,

    /// Flat `key = value` file applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,

    /// `key=value` override applied last; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,

    /// Record per-query wall time in result files.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Clone)]
struct Staged {
    #[command(flatten)]
    common: Common,

    /// Number of embedding models (and triplet sets) the stage covers.
    #[arg(long, default_value_t = 1)]
    embeddings: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the vocabulary and knowledge bases.
    GenKb(Common),
    /// Forward-chain each KB and sample training and test queries.
    GenQueries(Common),
    /// Generate triplet datasets.
    GenTriplets(Staged),
    /// Train embedding models.
    TrainEmbed(Staged),
    /// Label resolution steps by exhaustive search on training queries.
    CollectTraining(Common),
    /// Train one scoring model per (embedding, KB) pair.
    TrainScorer(Staged),
    /// Run the standard and guided reasoners on the test queries.
    Run(Staged),
    /// Write the reasoner comparison table from existing results.
    Compare(Common),
    /// Run every ablation arm on shared KBs and queries.
    Ablate(Common),
    /// Every embedding seed against every KB.
    Crosstest(Common),
    /// All stages followed by the comparison table.
    Pipeline(Common),
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::preset(&common.preset)?;
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{kv}` is not key=value")))?;
        cfg.set(k, v)?;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.timing |= common.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn open(common: &Common) -> Result<Run> {
    let mut run = Run::open(resolve(common)?)?;
    run.set_logger(|line| eprintln!("{line}"));
    Ok(run)
}

fn print_file(path: &Path) -> Result<()> {
    print!("{}", std::fs::read_to_string(path)?);
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenKb(c) => open(&c)?.gen_kbs(),
        Command::GenQueries(c) => open(&c)?.gen_queries(),
        Command::GenTriplets(s) => open(&s.common)?.gen_triplets(s.embeddings),
        Command::TrainEmbed(s) => open(&s.common)?.train_embeddings(s.embeddings),
        Command::CollectTraining(c) => open(&c)?.collect_training(),
        Command::TrainScorer(s) => open(&s.common)?.train_scorers(s.embeddings),
        Command::Run(s) => open(&s.common)?.run_reasoners(s.embeddings),
        Command::Compare(c) => print_file(&open(&c)?.write_compare()?),
        Command::Pipeline(c) => print_file(&open(&c)?.pipeline()?),
        Command::Crosstest(c) => print_file(&open(&c)?.crosstest()?),
        Command::Ablate(c) => {
            let report = ablate(&resolve(&c)?, |line| eprintln!("{line}"))?;
            print_file(&report.path)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(9);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
