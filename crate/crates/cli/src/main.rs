use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use qrouter::config::{defaults_table, parse_config, Architecture, SimConfig};
use qrouter::harness::{
    csv_string, read_csv, run_point_detailed, sweep, HarnessError, SummaryRow, SweepGrid,
};
use qrouter::oracle::{oracle_check, OracleError};
use qrouter::plot::{render_svg, PlotKind};

const EXIT_CONFIG: u8 = 2;
const EXIT_SIMULATION: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "qrouter",
    version,
    about = "Quantum repeater simulator with and without a local router"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchChoice {
    Router,
    Routerless,
    Both,
}

impl ArchChoice {
    fn list(self) -> Vec<Architecture> {
        match self {
            ArchChoice::Router => vec![Architecture::Router],
            ArchChoice::Routerless => vec![Architecture::Routerless],
            ArchChoice::Both => vec![Architecture::Router, Architecture::Routerless],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindChoice {
    Rate,
    Infidelity,
    Ratio,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and print its summary row as CSV.
    Run {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        runs: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (architecture, L, m) combination and write a CSV.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u32>,
        #[arg(long = "L", value_delimiter = ',', required = true)]
        lengths: Vec<f64>,
        #[arg(long, value_enum, default_value = "both")]
        arch: ArchChoice,
        #[arg(long, default_value_t = 3)]
        runs: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the simulator against a closed-form scenario.
    Oracle { scenario: String, config: PathBuf },
    /// Draw a figure from a sweep CSV.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: KindChoice,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print every configuration key with its default.
    Defaults,
}

/// Error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(fail(EXIT_CONFIG))?;
    parse_config(&text)
        .with_context(|| format!("invalid configuration {}", path.display()))
        .map_err(fail(EXIT_CONFIG))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, runs, out } => {
            let cfg = load_config(&config)?;
            let (row, stats) =
                run_point_detailed(&cfg, runs).map_err(|e| fail(EXIT_SIMULATION)(e.into()))?;
            for s in &stats {
                eprintln!(
                    "seed {:>20}: {} deliveries, rate {:.3} Hz, fidelity {:.6}",
                    s.seed, s.deliveries, s.rate_hz, s.fidelity
                );
            }
            emit(out.as_deref(), &csv_string(&[row])).map_err(fail(EXIT_SIMULATION))
        }
        Command::Sweep {
            config,
            m,
            lengths,
            arch,
            runs,
            out,
        } => {
            let base = load_config(&config)?;
            let grid = SweepGrid {
                ms: m,
                lengths_km: lengths,
                architectures: arch.list(),
                runs,
            };
            grid.validate().map_err(|e| fail(EXIT_CONFIG)(e.into()))?;
            match sweep(&grid, &base) {
                Ok(rows) => emit(out.as_deref(), &csv_string(&rows)).map_err(fail(EXIT_SIMULATION)),
                Err(e) if matches!(e.source, HarnessError::Config(_) | HarnessError::Grid(_)) => {
                    Err(fail(EXIT_CONFIG)(e.into()))
                }
                Err(e) => {
                    let mut text = csv_string(&e.completed);
                    let error = anyhow::Error::from(e);
                    text.push_str(&format!("# PARTIAL: {error:#}\n"));
                    // The partial file is best effort; the sweep error is what gets reported.
                    let _ = emit(out.as_deref(), &text);
                    Err(fail(EXIT_SIMULATION)(error))
                }
            }
        }
        Command::Oracle { scenario, config } => {
            let cfg = load_config(&config)?;
            let report = oracle_check(&scenario, &cfg).map_err(|e| {
                let code = match e {
                    OracleError::UnknownScenario(_)
                    | OracleError::Unsupported { .. }
                    | OracleError::Config(_) => EXIT_CONFIG,
                    OracleError::Harness(HarnessError::Config(_)) => EXIT_CONFIG,
                    OracleError::Harness(_) => EXIT_SIMULATION,
                };
                fail(code)(e.into())
            })?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(fail(EXIT_ORACLE)(anyhow::anyhow!(
                    "oracle `{scenario}` failed its z-score bound"
                )))
            }
        }
        Command::Plot { csv, kind, out } => {
            let file = fs::File::open(&csv)
                .with_context(|| format!("cannot read {}", csv.display()))
                .map_err(fail(EXIT_CONFIG))?;
            let rows: Vec<SummaryRow> = read_csv(file).map_err(|e| fail(EXIT_CONFIG)(e.into()))?;
            let kind = match kind {
                KindChoice::Rate => PlotKind::Rate,
                KindChoice::Infidelity => PlotKind::Infidelity,
                KindChoice::Ratio => PlotKind::Ratio,
            };
            let svg = render_svg(&rows, kind).map_err(|e| fail(EXIT_CONFIG)(e.into()))?;
            emit(Some(&out), &svg).map_err(fail(EXIT_SIMULATION))
        }
        Command::Defaults => {
            print!("{}", defaults_table());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
