use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use causal_compare::report::{cmd_estimate, cmd_learn_structure, cmd_render, cmd_simulate, EXIT_UNUSABLE};

#[derive(Parser)]
#[command(name = "causal-compare", version, about = "Compare propensity-score and causal-network effect estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a ground-truth network, with exact effects.
    Simulate {
        /// Ground-truth JSON; the bundled network when omitted.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a study configuration and write the result bundle and figures.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Learn the best-scoring networks from data.
    LearnStructure {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Redraw the figures of an existing bundle.
    Render {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: causal_compare::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_UNUSABLE as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { truth, n, seed, out } => match cmd_simulate(truth.as_deref(), n, seed, &out) {
            Ok(paths) => {
                println!("wrote {} and {}", paths.data.display(), paths.oracle.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Estimate { config } => match cmd_estimate(&config) {
            Ok(run) => {
                for f in &run.bundle.failures {
                    eprintln!("failed: {} {}: {}", f.comparison.label(), f.method, f.error);
                }
                for e in &run.bundle.estimates {
                    println!(
                        "{} {}: {:.4} [{:.4}, {:.4}]",
                        e.comparison.label(),
                        e.method,
                        e.point,
                        e.lower,
                        e.upper
                    );
                }
                ExitCode::from(run.status.exit_code() as u8)
            }
            Err(e) => fail(e),
        },
        Command::LearnStructure { data, schema, k, seed, out } => {
            match cmd_learn_structure(&data, &schema, k, seed, &out) {
                Ok(report) => {
                    for (i, net) in report.networks.iter().enumerate() {
                        println!("{}: score {:.4}, {} edges", i + 1, net.score, net.dag.n_edges());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Render { bundle, out } => match cmd_render(&bundle, &out) {
            Ok(files) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
