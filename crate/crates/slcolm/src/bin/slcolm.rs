//! Command-line entry point.
//!
//! Subcommands: `generate-fixture`, `stats`, `run`, `ablate`, `merge-sweep`,
//! `report`. A declarative JSON config drives `run` and friends; a handful
//! of flags override individual fields. Exit codes: 0 success, 1 config or
//! data error, 2 backend failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slcolm::eval::percent;
use slcolm::fixture::{self, FixtureSpec};
use slcolm::ingest;
use slcolm::merge::MergeMode;
use slcolm::pipeline::{self, RunConfig, RunSummary};
use slcolm::Error;

#[derive(Parser)]
#[command(name = "slcolm", version, about = "Train-guide-predict collaboration pipeline for relation extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Path to the JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the demonstration count.
    #[arg(long)]
    demo_n: Option<usize>,
    /// Override the demonstration selection seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the candidate selection mode (similarity|trigger|both|none).
    #[arg(long)]
    candidate_mode: Option<String>,
    /// Override the merge modes, comma-separated (e.g. "0,1,2,3,4").
    #[arg(long)]
    merge_modes: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic long-tail corpus plus scripted SLM predictions.
    GenerateFixture {
        /// Output directory for the fixture tree.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Fixture spec JSON; the built-in long-tail preset when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Schema JSON; the built-in demo schema when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Dataset statistics and candidate coverage per selection mode.
    Stats(ConfigArgs),
    /// Run the full pipeline over the test split.
    Run(ConfigArgs),
    /// Run the four-component prompt ablation grid (raw LLM outputs).
    Ablate(ConfigArgs),
    /// One LLM pass, all five merge modes.
    MergeSweep(ConfigArgs),
    /// Rebuild merged predictions and reports from stored responses.
    Report(ConfigArgs),
}

fn apply_overrides(mut config: RunConfig, args: &ConfigArgs) -> Result<RunConfig, Error> {
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(n) = args.demo_n {
        config.demos.n = n;
    }
    if let Some(seed) = args.seed {
        config.demos.seed = seed;
    }
    if let Some(mode) = &args.candidate_mode {
        config.candidates.mode = serde_json::from_value(serde_json::json!(mode))
            .map_err(|_| Error::Config(format!("unknown candidate mode {mode:?}")))?;
    }
    if let Some(modes) = &args.merge_modes {
        let parsed: Result<Vec<MergeMode>, Error> = modes
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u8>()
                    .map_err(|_| Error::Config(format!("bad merge mode {s:?}")))
                    .and_then(|v| MergeMode::try_from(v).map_err(Error::Config))
            })
            .collect();
        config.merge.modes = parsed?;
    }
    config.validate()?;
    Ok(config)
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Error> {
    apply_overrides(RunConfig::load(&args.config)?, args)
}

fn print_summary(summary: &RunSummary) {
    println!(
        "test samples: {}   llm calls: {}   network requests: {}   cache hits/misses: {}/{}",
        summary.manifest.n_test,
        summary.stats.llm_calls,
        summary.stats.network_requests,
        summary.stats.cache_hits,
        summary.stats.cache_misses
    );
    println!(
        "SLM-only      micro F1 {:6.2}   macro F1 {:6.2}",
        percent(summary.slm_report.micro.f1),
        percent(summary.slm_report.macro_.f1)
    );
    println!(
        "LLM raw       micro F1 {:6.2}   macro F1 {:6.2}",
        percent(summary.llm_raw_report.micro.f1),
        percent(summary.llm_raw_report.macro_.f1)
    );
    for outcome in &summary.mode_outcomes {
        println!(
            "merge mode {}  micro F1 {:6.2}   macro F1 {:6.2}",
            outcome.mode.index(),
            percent(outcome.report.micro.f1),
            percent(outcome.report.macro_.f1)
        );
    }
    if let Some(coverage) = &summary.coverage {
        for (mode, rate) in &coverage.rates {
            println!("coverage {mode:<10} {rate:6.2}%");
        }
    }
}

fn real_main() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenerateFixture {
            out,
            seed,
            spec,
            schema,
        } => {
            let schema = match schema {
                Some(path) => ingest::load_schema(path)?,
                None => fixture::demo_schema(),
            };
            let spec: FixtureSpec = match spec {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => fixture::demo_fixture_spec(),
            };
            let generated = fixture::write_fixture(&out, &spec, &schema, seed)?;
            println!(
                "wrote fixture to {}: {} train / {} dev / {} test samples",
                out.display(),
                generated.corpus.train.len(),
                generated.corpus.dev.len(),
                generated.corpus.test.len()
            );
        }
        Command::Stats(args) => {
            let config = load_config(&args)?;
            let summary = pipeline::dataset_stats(&config)?;
            println!(
                "samples: {}   chars: {}   triples: {}",
                summary.stats.n_samples, summary.stats.n_chars, summary.stats.n_triples
            );
            println!(
                "tail relations (< {} corpus triples): {}",
                summary.stats.tail_threshold,
                summary
                    .stats
                    .tail_relations
                    .iter()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            for (relation, count) in &summary.stats.per_relation_counts {
                let train = summary
                    .stats
                    .per_relation_train_counts
                    .get(relation)
                    .copied()
                    .unwrap_or(0);
                println!("{relation:<24} total {count:>5}   train {train:>5}");
            }
            match summary.coverage {
                Some(coverage) => {
                    for (mode, rate) in &coverage.rates {
                        println!("coverage {mode:<10} {rate:6.2}%");
                    }
                }
                None => println!("coverage: skipped (candidate mode none)"),
            }
        }
        Command::Run(args) => {
            let config = load_config(&args)?;
            let summary = pipeline::run(config)?;
            print_summary(&summary);
        }
        Command::Ablate(args) => {
            let config = load_config(&args)?;
            let cells = pipeline::ablate(config)?;
            for cell in &cells {
                let mark = |b: bool| if b { "+" } else { "-" };
                println!(
                    "id {}  dem {} ref {} def {}   micro F1 {:6.2}   macro F1 {:6.2}",
                    cell.id,
                    mark(cell.demos),
                    mark(cell.slm_ref),
                    mark(cell.defs),
                    percent(cell.llm_raw_report.micro.f1),
                    percent(cell.llm_raw_report.macro_.f1)
                );
            }
        }
        Command::MergeSweep(args) => {
            let mut config = load_config(&args)?;
            config.merge.modes = MergeMode::ALL.to_vec();
            let summary = pipeline::run(config)?;
            print_summary(&summary);
        }
        Command::Report(args) => {
            let config = load_config(&args)?;
            let summary = pipeline::regenerate(config)?;
            print_summary(&summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
