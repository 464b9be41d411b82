use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use roughcert::checks::{self, CHECKS};
use roughcert::scenario::{self, RunOptions};

/// Empirical certification of estimates for `a(t,x) dw/dt - Lw = f`
/// with Dirichlet data, and of the systems built on it.
#[derive(Parser)]
#[command(name = "roughcert", version)]
struct Cli {
    /// Output root; a fresh `run-<secs>` directory is created below it.
    /// Defaults to $ROUGHCERT_OUT, then ./roughcert-out.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores, or `workers` in [run]).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Seed overriding every scenario seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a config file and write the ledger.
    Run { config: PathBuf },
    /// List the available checks.
    ListChecks,
    /// Explain one check and its pass rule.
    Describe { check: String },
}

fn run(config: PathBuf, opts: RunOptions) -> ExitCode {
    let config = match scenario::load_config(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    let summary = match scenario::run_config(&config, &opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut out = std::io::stdout().lock();
    for row in &summary.ledger.rows {
        let _ = writeln!(
            out,
            "{:<13} {:<24} {:<24} measured={:<12.6e} threshold={:.6e}",
            row.verdict.as_str(),
            row.scenario,
            row.check,
            row.measured,
            row.threshold
        );
    }
    let _ = writeln!(out, "ledger: {}", summary.dir.join("ledger.csv").display());
    ExitCode::from(summary.ledger.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config } => run(
            config,
            RunOptions {
                out_root: cli.out,
                workers: cli.workers.map(|w| w as usize),
                seed: cli.seed,
            },
        ),
        Command::ListChecks => {
            let mut out = std::io::stdout().lock();
            for c in CHECKS {
                let kinds: Vec<&str> = c.kinds.iter().map(|k| k.as_str()).collect();
                let _ = writeln!(out, "{:<26} {:<16} {}", c.name, kinds.join(","), c.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Describe { check } => match checks::find(&check) {
            Some(info) => {
                print!("{}", checks::describe(info));
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown check `{check}`; see `roughcert list-checks`");
                ExitCode::from(1)
            }
        },
    }
}
