use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mintime::cli::{configure_threads, run, RunOptions};

#[derive(Parser)]
#[command(name = "mintime", version, about = "Minimal controllability time under a convex state constraint")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a scenario and write result.json (plus CSV tables) to DIR.
    Run {
        scenario: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        /// Synthesize a control and write trajectory.csv.
        #[arg(long)]
        traj: bool,
        /// Compare the computed time with simulated arrivals.
        #[arg(long)]
        verify: bool,
        #[arg(long, value_name = "X")]
        quad_tol: Option<f64>,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let Command::Run {
        scenario,
        out,
        traj,
        verify,
        quad_tol,
        seed,
    } = cli.command;
    let opts = RunOptions {
        scenario,
        out,
        traj,
        verify,
        quad_tol,
        seed,
    };
    match run(&opts) {
        Ok(outcome) => {
            let doc = &outcome.document;
            match (doc.status, doc.time, &doc.lower_bound) {
                (Some(status), time, _) => {
                    println!("{}: {status:?}{}", doc.scenario, time.map(|t| format!(", time {t}")).unwrap_or_default())
                }
                (None, _, Some(lb)) => match lb.bound {
                    Some(b) => println!("{}: lower bound {b}", doc.scenario),
                    None => println!("{}: lower bound infinite", doc.scenario),
                },
                _ => println!("{}: done", doc.scenario),
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
