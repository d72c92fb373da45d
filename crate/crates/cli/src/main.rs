//! `oseen`: solves, convergence studies, complex audits and DOF tables.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "oseen", version, about = "Stabilized H(div) finite elements for the Oseen equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on one mesh level and report residual, divergence and errors.
    Solve,
    /// Convergence study over mesh levels; writes a CSV table.
    Study,
    /// Exactness of the discrete complex and inf-sup constants per level.
    Audit,
    /// Stenberg versus BDM degree-of-freedom counts.
    Dofs,
}

fn main() {
    let cli = Cli::parse();
    let name = match cli.command {
        Command::Solve => "solve",
        Command::Study => "study",
        Command::Audit => "audit",
        Command::Dofs => "dofs",
    };
    let cfg = match RunConfig::resolve(name, &cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            std::process::exit(2);
        }
    };
    let result = match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Study => commands::study(&cfg),
        Command::Audit => commands::audit(&cfg),
        Command::Dofs => commands::dofs(&cfg),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
