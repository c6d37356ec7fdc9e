use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ucdsc::commands::{self, Common, View};
use ucdsc::CliError;
use ucdsc_core::eval::ScoreMode;

#[derive(Parser)]
#[command(name = "ucdsc", version, about = "Open-set recognition with fixed simplex class centers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run config (an ablation grid for `ablate`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the root seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    score_mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    NegMinDist,
    OneMinusU,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Test,
    Train,
}

#[derive(Subcommand)]
enum Command {
    /// Build a simplex and report its deviation from the ideal one.
    SimplexCheck {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Train trial 0 of the configured protocol and save a checkpoint.
    Train,
    /// Evaluate a checkpoint directory.
    Eval {
        /// Directory written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split file; defaults to the checkpoint's split.json.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        view: ViewArg,
    },
    /// Train and evaluate every trial of the protocol.
    Trials,
    /// Sweep loss and training settings over a grid.
    Ablate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let a = cli.common;
    let common = Common {
        config: a.config,
        out: a.out,
        seed: a.seed,
        score_mode: a.score_mode.map(|m| match m {
            ModeArg::NegMinDist => ScoreMode::NegMinDist,
            ModeArg::OneMinusU => ScoreMode::OneMinusU,
        }),
    };
    match cli.command {
        Command::SimplexCheck { classes, dim, radius } => {
            print!("{}", commands::simplex_check(classes, dim, radius)?);
            Ok(())
        }
        Command::Train => commands::train(&common),
        Command::Eval { checkpoint, split, view } => {
            let view = match view {
                ViewArg::Test => View::Test,
                ViewArg::Train => View::Train,
            };
            commands::eval(&common, &checkpoint, split.as_deref(), view)
        }
        Command::Trials => {
            let report = commands::trials(&common)?;
            let m = report.mean;
            println!("mean acc {:.4} auroc {:.4} oscr {:.4}", m.acc, m.auroc, m.oscr);
            Ok(())
        }
        Command::Ablate => commands::ablate(&common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}
