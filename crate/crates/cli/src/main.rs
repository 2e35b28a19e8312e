use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nlepi_cli::commands::{self, Target};
use nlepi_cli::config::{parse_config, RunConfig};
use nlepi_cli::output::json;
use nlepi_cli::sweep::{parse_spec, run_sweep, write_rows};
use nlepi_cli::CliError;

/// Nonlocal epidemic model with free boundaries: simulation, eigenvalues and thresholds.
#[derive(Parser)]
#[command(name = "nlepi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the free-boundary system; writes trajectory.csv, summary.json and snapshots.csv.
    Simulate {
        config: PathBuf,
        /// Output directory, overriding output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the spatially homogeneous system; writes ode.csv.
    Ode {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Principal eigenvalue on an interval.
    Eigen {
        config: PathBuf,
        /// Also write eigenvector.csv.
        #[arg(long)]
        dump: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate one of the sharp constants and print a JSON record.
    Thresholds {
        config: PathBuf,
        #[arg(long, value_enum)]
        target: TargetArg,
    },
    /// Run a parameter sweep described by a sweep spec.
    Sweep {
        spec: PathBuf,
        /// Maximum concurrent runs.
        #[arg(long, env = "NLEPI_WORKERS")]
        workers: Option<usize>,
        /// Result CSV, overriding the spec's output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the modelling assumptions for a configuration.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    #[value(name = "Lstar")]
    LStar,
    #[value(name = "dstar")]
    DStar,
    #[value(name = "mustar")]
    MuStar,
    #[value(name = "sigmastar")]
    SigmaStar,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::LStar => Target::LStar,
            TargetArg::DStar => Target::DStar,
            TargetArg::MuStar => Target::MuStar,
            TargetArg::SigmaStar => Target::SigmaStar,
        }
    }
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.output.dir.clone())
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = parse_config(&config)?;
            let dir = out_dir(&cfg, out);
            let class = commands::simulate(&cfg, &dir)?;
            println!("{}", serde_json::to_string(&class).unwrap_or_default().trim_matches('"'));
        }
        Command::Ode { config, out } => {
            let cfg = parse_config(&config)?;
            let report = commands::ode(&cfg, &out_dir(&cfg, out))?;
            print!("{}", json(&report));
        }
        Command::Eigen { config, dump, out } => {
            let cfg = parse_config(&config)?;
            let report = commands::eigen(&cfg, &out_dir(&cfg, out), dump)?;
            print!("{}", json(&report));
        }
        Command::Thresholds { config, target } => {
            let cfg = parse_config(&config)?;
            print!("{}", json(&commands::thresholds(&cfg, target.into())?));
        }
        Command::Sweep { spec, workers, out } => {
            let (s, template) = parse_spec(&spec)?;
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = run_sweep(&s, &template, workers)?;
            let path = out.unwrap_or_else(|| s.output.clone());
            write_rows(&path, &s.parameter, &rows)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} runs, {failed} failed, results in {}", rows.len(), path.display());
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            let checks = commands::validate(&cfg);
            for c in &checks {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                if c.detail.is_empty() {
                    println!("{mark} {}", c.assumption);
                } else {
                    println!("{mark} {}: {}", c.assumption, c.detail);
                }
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(2);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("nlepi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
