use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rectenna_cli::{execute, verify, CliError, Command};

/// Simulates the RF harvesting chain described by a scenario file and
/// writes CSV tables (and an SVG plot when asked) into the output directory.
#[derive(Parser)]
#[command(name = "rectenna", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Input reflection of the matching network.
    S11(Paths),
    /// Rectifier efficiency over input power.
    RectEff(Paths),
    /// Maximum power point voltage ratio over input power.
    Mpp(Paths),
    /// Efficiency from antenna port to storage.
    EndToEnd(Paths),
    /// Power management start-up from empty storage.
    Coldstart(Paths),
    /// Free-space received power over distance.
    Link(Paths),
    /// Fit the preset to the target figures and write `defaults.scn`.
    Calibrate(Paths),
    /// Check that the CSVs in --out were produced from this scenario.
    Verify(Paths),
}

#[derive(Args)]
struct Paths {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::FAILURE
}

fn run(sub: Sub) -> Result<(), CliError> {
    let (command, paths) = match sub {
        Sub::S11(p) => (Command::S11, p),
        Sub::RectEff(p) => (Command::RectEff, p),
        Sub::Mpp(p) => (Command::Mpp, p),
        Sub::EndToEnd(p) => (Command::EndToEnd, p),
        Sub::Coldstart(p) => (Command::ColdStart, p),
        Sub::Link(p) => (Command::Link, p),
        Sub::Calibrate(p) => (Command::Calibrate, p),
        Sub::Verify(p) => {
            for (path, prov) in verify(&p.scenario, &p.out)? {
                println!("ok {} ({} rows)", path.display(), prov.rows);
            }
            return Ok(());
        }
    };
    for path in execute(command, &paths.scenario, &paths.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end()),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
