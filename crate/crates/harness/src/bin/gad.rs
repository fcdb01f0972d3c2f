use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gad_harness::config::ConfigError;
use gad_harness::io::{to_json, write_atomic};
use gad_harness::{commands, train, with_thread_cap, Mode, Result, RunConfig};

#[derive(Parser)]
#[command(name = "gad", about = "Black-box distillation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra KEY=VALUE setting, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a student and write metrics, checkpoints and a report.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "gad")]
        mode: Mode,
        /// Output directory; defaults to the config's out_dir or runs/<label>-<mode>-<seed>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the validation and test splits.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config to use instead of the one stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus n-gram F1 between two token-id files.
    Ngram {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        /// CSV output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the one-dimensional mixture comparison.
    Toy {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "runs/toy")]
        out: PathBuf,
    },
    /// Print checkpoint metadata and per-segment norms.
    Inspect { checkpoint: PathBuf },
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match (&args.config, args.seed) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(seed)) => RunConfig::with_seed(seed),
        (None, None) => return Err(ConfigError::MissingKey("seed".into()).into()),
    };
    if let Some(seed) = args.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    for s in &args.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line: 0, msg: format!("--set expects KEY=VALUE, got {s:?}") })?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { cfg, mode, out } => {
            let cfg = load_config(&cfg)?;
            let mode_name = format!("{mode:?}").to_lowercase();
            let out = out
                .or_else(|| cfg.out_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{mode_name}-{}", cfg.label, cfg.seed)));
            let report = with_thread_cap(|| train(&cfg, mode, &out))??;
            println!(
                "{}: {} steps, selected checkpoint {}, val greedy logprob {:.4}",
                out.display(),
                report.steps,
                report.selected_step.map_or("none".to_string(), |s| format!("step {s}")),
                report.final_val.logprob_greedy
            );
        }
        Command::Eval { checkpoint, config, out } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let report = with_thread_cap(|| commands::eval_checkpoint(&checkpoint, cfg.as_ref()))??;
            emit(&to_json(&report), out.as_deref())?;
        }
        Command::Ngram { candidates, references, n_min, n_max, out } => {
            emit(&commands::ngram_table(&candidates, &references, n_min, n_max)?, out.as_deref())?;
        }
        Command::Toy { cfg, out } => {
            let cfg = load_config(&cfg)?;
            let r = commands::toy(&cfg, &out)?;
            println!(
                "{}: reverse KL seqkd {:.4} gad {:.4}, gad mode {} mass {:.3}",
                out.display(),
                r.seqkd_reverse_kl,
                r.gad_reverse_kl,
                r.gad_mode.component,
                r.gad_mode.mass
            );
        }
        Command::Inspect { checkpoint } => {
            print!("{}", to_json(&commands::inspect(&checkpoint)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
