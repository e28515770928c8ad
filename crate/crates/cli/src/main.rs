//! `unitlint`: run programs under a scenario, mine a type database from the
//! trace, and check programs for unit type errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Format;

#[derive(Parser)]
#[command(
    name = "unitlint",
    version,
    about = "Unit type error detection for a small C-like language"
)]
struct Cli {
    /// Configuration file (TOML). Falls back to $UNITLINT_CONFIG.
    #[arg(long, global = true, env = "UNITLINT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interpret a program under a scenario and write its trace.
    Run {
        /// Program source (.ml4u).
        program: PathBuf,
        /// Scenario file (TOML) with QOI generators and input events.
        #[arg(long)]
        scenario: PathBuf,
        /// Trace CSV to write; `<out>.registry.json` and `<out>.enums.json` are written alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine a type database from a trace.
    Deduce {
        /// Trace CSV written by `run`.
        trace: PathBuf,
        /// Scenario or QOI declaration file.
        #[arg(long)]
        qoi: Option<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Relative tolerance of the approximate rule, in (0, 1).
        #[arg(long)]
        eps_approx: Option<f64>,
    },
    /// Check programs for unit type errors.
    Check {
        /// Translation units to check.
        #[arg(required = true)]
        programs: Vec<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Output format (default: human).
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Report every diagnostic, including repeats from shared includes.
        #[arg(long)]
        no_dedup: bool,
    },
    /// Print the generated constraints as S-expressions.
    DumpConstraints {
        /// Translation units to dump.
        #[arg(required = true)]
        programs: Vec<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
}

#[derive(Args)]
struct AnalysisArgs {
    /// Protocol definition (MAVLink-style XML) declaring message field units.
    #[arg(long)]
    protocol: Option<PathBuf>,
    /// Type database written by `deduce`.
    #[arg(long)]
    db: Option<PathBuf>,
    /// Function whose arguments and result carry no units (repeatable).
    #[arg(long = "ignore-fn")]
    ignore_fn: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = match &cli.config {
        Some(p) => match config::Config::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => config::Config::default(),
    };
    let result = match cli.command {
        Command::Run {
            program,
            scenario,
            out,
        } => commands::run(&program, &scenario, &out),
        Command::Deduce {
            trace,
            qoi,
            out,
            eps_approx,
        } => commands::deduce(
            &trace,
            qoi.or(cfg.qoi.clone()).as_deref(),
            out.as_deref(),
            eps_approx,
            &cfg,
        ),
        Command::Check {
            programs,
            analysis,
            format,
            no_dedup,
        } => {
            let opts = commands::CheckArgs {
                protocol: analysis.protocol.or(cfg.protocol.clone()),
                db: analysis.db.or(cfg.db.clone()),
                ignore: analysis.ignore_fn,
                format: format.or(cfg.format).unwrap_or_default(),
                dedup: !no_dedup && cfg.dedup.unwrap_or(true),
            };
            commands::check(&programs, &opts, &cfg)
        }
        Command::DumpConstraints { programs, analysis } => {
            let opts = commands::CheckArgs {
                protocol: analysis.protocol.or(cfg.protocol.clone()),
                db: analysis.db.or(cfg.db.clone()),
                ignore: analysis.ignore_fn,
                format: Format::Human,
                dedup: true,
            };
            commands::dump(&programs, &opts, &cfg)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
