use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fuzzy_backstep_cli::{run_feasibility, run_simulation, validate_report, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "fbs",
    version,
    about = "Adaptive fuzzy backstepping under input delay and state constraints"
)]
struct Cli {
    /// Write every N-th sample to the trajectory CSV (overrides the scenario).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    stride: Option<u64>,
    /// Output directory (overrides the scenario).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write the trajectory, reports and plot script.
    Sim { scenario: PathBuf },
    /// Search a gain grid for the feasible candidate with the largest gain sum.
    Feas {
        scenario: PathBuf,
        #[arg(long)]
        grid: PathBuf,
    },
    /// Check a scenario and print derived quantities without simulating.
    Validate { scenario: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    match cli.command {
        Command::Sim { scenario } => {
            match run_simulation(&scenario, cli.stride.map(|s| s as usize), out) {
                Ok((summary, dir)) => {
                    print!("{}", summary.text());
                    println!("wrote {}", dir.display());
                    code(EXIT_OK)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(e.exit_code())
                }
            }
        }
        Command::Feas { scenario, grid } => match run_feasibility(&scenario, &grid, out) {
            Ok((text, dir)) => {
                print!("{text}");
                println!("wrote {}", dir.display());
                code(EXIT_OK)
            }
            Err((e, text)) => {
                if let Some(text) = text {
                    print!("{text}");
                }
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
        Command::Validate { scenario } => match validate_report(&scenario) {
            Ok(text) => {
                print!("{text}");
                code(EXIT_OK)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
    }
}
