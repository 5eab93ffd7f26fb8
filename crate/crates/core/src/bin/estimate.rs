use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qris::harness::{run_sweep, trace_run, write_csv, write_trace_csv, SystemConfig};
use qris::{selftest, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "estimate", version, about = "Few-bit RIS cascaded channel estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write one CSV row per cell and estimator.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the fast paths against dense and quadrature oracles.
    Selftest,
    /// Solve a single problem and print the per-iteration trace as CSV.
    Trace {
        #[arg(long)]
        config: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<SystemConfig, ExitCode> {
    SystemConfig::load(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::NonFinite { .. } => ExitCode::from(EXIT_SOLVER),
        Error::InvalidConfig(_)
        | Error::Toml(_)
        | Error::BitsOutOfRange(_)
        | Error::TrainingTooShort { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn sweep(config: PathBuf, out: PathBuf) -> ExitCode {
    let cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let result = match run_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let written = File::create(&out)
        .map_err(Error::from)
        .and_then(|f| write_csv(&result.records, BufWriter::new(f)));
    if let Err(e) = written {
        return fail(e);
    }
    eprintln!("wrote {} records to {}", result.records.len(), out.display());
    if result.aborted > 0 {
        eprintln!("{} solve(s) aborted on non-finite state", result.aborted);
        return ExitCode::from(EXIT_SOLVER);
    }
    ExitCode::SUCCESS
}

fn trace(config: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let output = match trace_run(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let written = match out {
        Some(path) => File::create(path)
            .map_err(Error::from)
            .and_then(|f| write_trace_csv(&output.trace, BufWriter::new(f))),
        None => write_trace_csv(&output.trace, io::stdout().lock()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn run_selftest() -> ExitCode {
    let checks = match selftest::run_all() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let mut ok = true;
    for c in &checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        println!("{verdict}  {:<42} worst {:.3e} (tol {:.0e})", c.name, c.worst, c.tolerance);
        ok &= c.passed();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep { config, out } => sweep(config, out),
        Command::Selftest => run_selftest(),
        Command::Trace { config, out } => trace(config, out),
    }
}
