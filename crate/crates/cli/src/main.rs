use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::Outcome;

#[derive(Parser, Debug)]
#[command(name = "matchbox", version, about = "Cantor pseudogroup actions, solenoid classification and treespace evidence")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format; not every command supports every format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Recorded in report parameters; every computation is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tower equivalence, displacement and the Lipschitz verdict for two presentations.
    Classify {
        p: PathBuf,
        q: PathBuf,
        /// Levels examined; defaults to 64 for circles and 24 for Z^n chains.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Expansion growth profile over a list of epsilons.
    Entropy {
        spec: PathBuf,
        /// Comma-separated, strictly decreasing, e.g. 1/2,1/6,1/18.
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<String>,
        /// Word budgets, "a..b" (inclusive) or a single upper bound.
        #[arg(long, default_value = "0..6")]
        ell: String,
        /// Cylinder depth; defaults to the working depth.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Fuse two systems along a clopen identification and emit the fused spec.
    Fuse { spec: PathBuf },
    /// Covering counts of the free-group subtree space, checked by enumeration where feasible.
    Treespace { n: u8, k: usize },
    /// Box-dimension estimate over depths 1..=depth.
    Dimension {
        space: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Measured distortion of every word of length at most alpha.
    Audit {
        spec: PathBuf,
        #[arg(long)]
        alpha: usize,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Doubling condition with constant C up to the given depth.
    Doubling {
        space: PathBuf,
        #[arg(long = "c", default_value_t = 2)]
        c: u64,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
}

fn run(cli: &Cli) -> Outcome {
    let ctx = output::Context { format: cli.format, seed: cli.seed };
    match &cli.command {
        Command::Classify { p, q, horizon } => commands::classify(&ctx, p, q, *horizon),
        Command::Entropy { spec, epsilon, ell, depth } => commands::entropy(&ctx, spec, epsilon, ell, *depth),
        Command::Fuse { spec } => commands::fuse(&ctx, spec),
        Command::Treespace { n, k } => commands::treespace(&ctx, *n, *k),
        Command::Dimension { space, depth } => commands::dimension(&ctx, space, *depth),
        Command::Audit { spec, alpha, depth } => commands::audit(&ctx, spec, *alpha, *depth),
        Command::Doubling { space, c, depth } => commands::doubling(&ctx, space, *c, *depth),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on bad arguments, which here means "inconclusive"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { output::FAILED } else { output::DECIDED });
        }
    };
    let outcome = run(&cli);
    if let Some(body) = &outcome.body {
        let written = match &cli.out {
            Some(path) => std::fs::write(path, body).map_err(|e| format!("cannot write {}: {e}", path.display())),
            None => {
                print!("{body}");
                Ok(())
            }
        };
        if let Err(e) = written {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if let Some(msg) = &outcome.message {
        eprintln!("{msg}");
    }
    ExitCode::from(outcome.code)
}
