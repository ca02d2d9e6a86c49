//! Command-line front end for `secure-onoff`.
//!
//! Exit codes: 0 success (feasible), 1 usage or parse error, 2 infeasible
//! constraints, 3 degenerate Monte-Carlo run, 4 Monte-Carlo disagreement.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod figures;
pub mod output;

use clap::{Parser, Subcommand};
use commands::{McArgs, Outcome, PilotArgs, SweepArgs};
use config::{OutputArgs, Resolver, SystemArgs};
use std::ffi::OsString;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "secure-onoff", version, about = "Secure on-off transmission design under channel estimation errors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one design and print its record.
    Design {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Solve designs along one swept parameter.
    Sweep(SweepArgs),
    /// Emit the data series of an evaluation figure (1 to 8).
    Figure {
        id: u32,
        /// Grid points per axis.
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare closed-form performance with a Monte-Carlo run.
    McValidate(McArgs),
    /// Find the pilot power that maximizes throughput.
    OptimizePilot(PilotArgs),
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    let (outcome, format, out) = match cli.command {
        Command::Design { sys, out } => {
            let r = Resolver::new(sys)?;
            let (format, path) = r.output(&out);
            let outcome = commands::design(&r)?;
            // The record always goes to stdout; --out adds a copy on disk.
            if let Some(p) = &path {
                outcome.table.emit(format, Some(p))?;
            }
            (outcome, format, None)
        }
        Command::Sweep(args) => {
            let r = Resolver::new(args.sys.clone())?;
            let (format, path) = r.output(&args.out);
            (commands::sweep(&r, &args)?, format, path)
        }
        Command::Figure { id, points, out } => {
            let (format, path) = Resolver { file: Default::default(), sys: SystemArgs::default() }.output(&out);
            let table = figures::figure(id, points)?;
            (Outcome { table, code: EXIT_OK, diagnosis: None }, format, path)
        }
        Command::McValidate(args) => {
            let r = Resolver::new(args.sys.clone())?;
            let (format, path) = r.output(&args.out);
            (commands::mc_validate(&r, &args)?, format, path)
        }
        Command::OptimizePilot(args) => {
            let r = Resolver::new(args.sys.clone())?;
            let (format, path) = r.output(&args.out);
            (commands::optimize_pilot(&r, &args)?, format, path)
        }
    };
    if !outcome.table.columns.is_empty() {
        outcome.table.emit(format, out.as_deref())?;
    }
    if let Some(d) = outcome.diagnosis {
        eprintln!("{d}");
    }
    Ok(outcome.code)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}
