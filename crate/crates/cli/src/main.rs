//! `corpora` — speech-to-text corpus curation pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/config error, 3 endpoint
//! failure.

mod commands;
mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::filter::DiscardBasis;
use commands::{Metric, OutputFormat};
use io::RefField;

#[derive(Parser)]
#[command(
    name = "corpora",
    version,
    about = "Curation toolkit for speech-to-text training corpora",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// Cap on worker threads for per-example scoring.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-dataset corpus statistics and text-feature detection.
    Stats {
        /// Manifest (one JSON example per line).
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: OutputFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score hypotheses against references (CER/WER, plain or pc).
    Score {
        /// Reference file: manifest, `{id, text}` lines, or plain text.
        #[arg(long = "ref")]
        ref_path: PathBuf,
        /// Hypothesis file: `{id, text}` lines or plain text.
        #[arg(long = "hyp")]
        hyp_path: PathBuf,
        #[arg(long, value_enum, default_value = "wer")]
        metric: Metric,
        /// Language for references without one (plain/text files).
        #[arg(long, default_value = "eng")]
        language: String,
        /// Manifest field to score against.
        #[arg(long, value_enum, default_value = "y-tgt")]
        ref_field: RefField,
        /// Per-example counts (JSONL) for downstream filtering.
        #[arg(long)]
        per_example: Option<PathBuf>,
        /// Also report the mean of per-example rates.
        #[arg(long)]
        averaged: bool,
        /// Second hypothesis file to compare against (relative-reduction report).
        #[arg(long)]
        baseline_hyp: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank examples by CER against decode hypotheses and discard the worst k%.
    Filter {
        #[arg(long)]
        manifest: PathBuf,
        /// Hypotheses as `{id, text}` lines.
        #[arg(long)]
        hyp: PathBuf,
        /// Global discard percentage (default 5; tuned per-dataset overrides
        /// for LibriSpeech/GigaSpeech/WenetSpeech/GigaST stay active).
        #[arg(long)]
        k: Option<f64>,
        /// Per-dataset override, e.g. --k-override WenetSpeech=45 (repeatable).
        #[arg(long = "k-override", value_parser = parse_k_override)]
        k_overrides: Vec<(String, f64)>,
        /// Kept examples, in manifest order.
        #[arg(long)]
        out: PathBuf,
        /// Per-example cer/rank/verdict records.
        #[arg(long)]
        decisions: Option<PathBuf>,
        /// Discard by example count or by duration budget.
        #[arg(long, value_enum, default_value = "count")]
        by: DiscardBasis,
        #[arg(long, value_enum, default_value = "cer")]
        metric: Metric,
        /// Draw a proxy-task sample of the kept examples per dataset.
        #[arg(long)]
        proxy_out: Option<PathBuf>,
        #[arg(long, default_value_t = 50_000)]
        proxy_n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Request restoration candidates from an LLM endpoint (or offline mock).
    Candidates {
        #[arg(long)]
        manifest: PathBuf,
        /// http(s) URL of a chat-completions server, or mock:echo,
        /// mock:upper, mock:sentence.
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "default")]
        model: String,
        /// TOML file with per-language prompt templates and display names.
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_in_flight: usize,
        #[arg(long, default_value_t = 3)]
        max_retries: u32,
        #[arg(long, default_value_t = 60.0)]
        timeout_sec: f64,
        #[arg(long, default_value_t = 250)]
        retry_backoff_ms: u64,
        /// Environment variable holding the bearer token
        /// (default: CORPORA_API_TOKEN if set).
        #[arg(long)]
        auth_env: Option<String>,
    },
    /// Apply candidate restorations under constrained acceptance.
    Restore {
        #[arg(long)]
        manifest: PathBuf,
        /// Candidate file from `candidates`.
        #[arg(long)]
        candidates: PathBuf,
        /// Optional candidates for ST source transcriptions.
        #[arg(long)]
        src_candidates: Option<PathBuf>,
        /// Residual-WER threshold above which a candidate is rejected.
        #[arg(long, default_value_t = 0.30)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        /// Per-example edit decisions for inspection.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Splice segment timelines into long-form examples.
    Splice {
        /// Timelines as JSONL: {recording_id, dataset, language, segments}.
        #[arg(long)]
        segments: PathBuf,
        #[arg(long = "max-dur", default_value_t = 30.0)]
        max_dur: f64,
        #[arg(long, default_value_t = 0.5)]
        gap_tolerance: f64,
        #[arg(long)]
        out: PathBuf,
        /// Keep only examples free of untranscribed content and gaps.
        #[arg(long)]
        clean_only: bool,
    },
    /// Execute a declarative multi-stage pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_k_override(raw: &str) -> Result<(String, f64), String> {
    let (dataset, value) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected DATASET=K, got {raw:?}"))?;
    let k: f64 = value
        .parse()
        .map_err(|_| format!("k value in {raw:?} is not a number"))?;
    Ok((dataset.to_string(), k))
}

fn exit_code(err: &corpora_core::Error) -> i32 {
    match err {
        corpora_core::Error::Endpoint(_) => 3,
        _ => 2,
    }
}

fn dispatch(command: Command) -> corpora_core::Result<()> {
    match command {
        Command::Stats { manifest, format, out } => {
            commands::stats::run(&commands::stats::StatsParams { manifest, format, out })?;
        }
        Command::Score {
            ref_path,
            hyp_path,
            metric,
            language,
            ref_field,
            per_example,
            averaged,
            baseline_hyp,
            format,
            out,
        } => {
            commands::score::run(&commands::score::ScoreParams {
                ref_path,
                hyp_path,
                metric,
                language,
                ref_field,
                per_example,
                averaged,
                baseline_hyp,
                format,
                out,
            })?;
        }
        Command::Filter {
            manifest,
            hyp,
            k,
            k_overrides,
            out,
            decisions,
            by,
            metric,
            proxy_out,
            proxy_n,
            seed,
        } => {
            commands::filter::run(&commands::filter::FilterParams {
                manifest,
                hyp,
                k,
                k_overrides,
                out,
                decisions,
                by,
                metric,
                proxy_out,
                proxy_n,
                seed,
            })?;
        }
        Command::Candidates {
            manifest,
            endpoint,
            out,
            model,
            prompts,
            max_in_flight,
            max_retries,
            timeout_sec,
            retry_backoff_ms,
            auth_env,
        } => {
            commands::candidates::run(&commands::candidates::CandidatesParams {
                manifest,
                endpoint,
                out,
                model,
                prompts,
                max_in_flight,
                max_retries,
                timeout_sec,
                retry_backoff_ms,
                auth_env,
            })?;
        }
        Command::Restore {
            manifest,
            candidates,
            src_candidates,
            threshold,
            out,
            audit,
        } => {
            commands::restore::run(&commands::restore::RestoreParams {
                manifest,
                candidates,
                src_candidates,
                threshold,
                out,
                audit,
            })?;
        }
        Command::Splice {
            segments,
            max_dur,
            gap_tolerance,
            out,
            clean_only,
        } => {
            commands::splice::run(&commands::splice::SpliceParams {
                segments,
                max_duration_sec: max_dur,
                gap_tolerance_sec: gap_tolerance,
                out,
                clean_only,
            })?;
        }
        Command::Run { config } => {
            commands::run::run(&config)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    if let Err(err) = dispatch(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
