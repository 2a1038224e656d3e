use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use laplacegnn::config::RunConfig;

mod commands;

use commands::CliError;

/// Centrality-guided spectral augmentation and adversarial bootstrapped
/// training for graph representations.
#[derive(Parser, Debug)]
#[command(name = "laplacegnn", version)]
struct Cli {
    /// Run configuration in `key = value` form.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize augmentation plans and write one plan file per graph.
    Augment {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train the encoder; writes metrics.jsonl and checkpoints.
    Train(TrainArgs),
    /// Probe a trained checkpoint, optionally under structural attacks.
    Eval(EvalArgs),
    /// Time the eigensolver and report memory counters.
    Bench(BenchArgs),
    /// Print the effective configuration and exit.
    Config,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Read plan files written by `augment` instead of optimizing inline.
    #[arg(long, value_name = "DIR")]
    pub plans: Option<PathBuf>,
    /// Continue from a checkpoint; `train.epochs` is the new total.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Directory for eval.json and eval.txt.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Graph sizes for the n sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [200usize, 400, 800])]
    pub ns: Vec<usize>,
    /// Eigenvalue count used in the n sweep.
    #[arg(long, default_value_t = 8)]
    pub fixed_k: usize,
    /// Eigenvalue counts for the K sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32])]
    pub ks: Vec<usize>,
    /// Graph size used in the K sweep; 0 skips it.
    #[arg(long, default_value_t = 800)]
    pub fixed_n: usize,
    #[arg(long, default_value_t = 9)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    for o in &cli.overrides {
        cfg.set_pair(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Augment { out } => commands::augment(&cfg, &out),
        Command::Train(args) => commands::train(&cfg, &args),
        Command::Eval(args) => commands::eval(&cfg, &args),
        Command::Bench(args) => commands::bench(&args),
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
