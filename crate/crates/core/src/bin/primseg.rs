use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use primseg::cli::{execute, resolve_config, Command};

#[derive(Parser)]
#[command(name = "primseg", version, about = "Zero-shot point-cloud segmentation with geometric primitives")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate train/test scenes, class split and embeddings
    Gen(Common),
    /// Train a model and write a checkpoint
    Train(Common),
    /// Evaluate a checkpoint on the test scenes
    Eval(Common),
    /// Finite-difference check of every differentiable block
    Gradcheck(Common),
    /// Train and evaluate every cell of an ablation grid
    Ablate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys take defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory for the run directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. --set model.lambda=2
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Gen(a) => (Command::Gen, a),
        Cmd::Train(a) => (Command::Train, a),
        Cmd::Eval(a) => (Command::Eval, a),
        Cmd::Gradcheck(a) => (Command::Gradcheck, a),
        Cmd::Ablate(a) => (Command::Ablate, a),
    };
    let run = resolve_config(args.config.as_deref(), &args.set, args.seed, args.out.as_deref())
        .and_then(|cfg| execute(command, &cfg));
    match run {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            println!("run directory: {}", outcome.run_dir.display());
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
