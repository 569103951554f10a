use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use aerodiff::scenario::{
    breath_table, pmd_table, point_table, sample_table, spectrum_table, truncation_tables, validate_tables, AvgOver,
    Overrides, ScenarioConfig, SurrogateChoice, Table,
};
use aerodiff::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Spectral aerosol diffusion in a box room, with sampler detection analysis.
#[derive(Debug, Parser)]
#[command(name = "aerodiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV output; tables go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of positive modes solved per axis.
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Relative tail tolerance for adaptive truncation.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues, norms and point-source weights per axis.
    Spectrum,
    /// Point-source field on the grid.
    Point,
    /// Exhalation-source field on the grid.
    Breath {
        #[arg(long, value_enum, default_value_t = Surrogate::Circular)]
        surrogate: Surrogate,
    },
    /// Amount collected by each sampler.
    Sample,
    /// Miss-detection probability over Γ or detector location.
    Pmd,
    /// Error against a high-mode reference versus mode count.
    Truncation {
        #[arg(long, value_enum)]
        avg_over: Option<Average>,
    },
    /// Residual and finite-difference oracle report.
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Surrogate {
    Lower,
    Equal,
    Upper,
    Circular,
}

impl From<Surrogate> for SurrogateChoice {
    fn from(s: Surrogate) -> Self {
        match s {
            Surrogate::Lower => SurrogateChoice::Lower,
            Surrogate::Equal => SurrogateChoice::Equal,
            Surrogate::Upper => SurrogateChoice::Upper,
            Surrogate::Circular => SurrogateChoice::Circular,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Average {
    Time,
    Space,
}

enum Failure {
    Input(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = cli.common;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::Input("--config <path> is required".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    cfg.apply(Overrides {
        modes: common.modes,
        tol: common.tol,
    })?;

    let mut numeric_failure = None;
    let tables = match cli.command {
        Command::Spectrum => vec![spectrum_table(&cfg)?],
        Command::Point => vec![point_table(&cfg)?],
        Command::Breath { surrogate } => vec![breath_table(&cfg, surrogate.into())?],
        Command::Sample => vec![sample_table(&cfg)?],
        Command::Pmd => vec![pmd_table(&cfg)?],
        Command::Truncation { avg_over } => {
            if let (Some(avg), Some(spec)) = (avg_over, cfg.truncation.as_mut()) {
                spec.avg_over = match avg {
                    Average::Time => AvgOver::Time,
                    Average::Space => AvgOver::Space,
                };
            }
            truncation_tables(&cfg)?
        }
        Command::Validate => {
            let report = validate_tables(&cfg)?;
            if !report.passed {
                numeric_failure = Some("one or more validation checks failed".to_string());
            }
            report.tables
        }
    };

    let out_dir = common.out.or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()));
    emit(&tables, out_dir.as_deref())?;
    match numeric_failure {
        Some(msg) => Err(Failure::Numeric(msg)),
        None => Ok(()),
    }
}

fn emit(tables: &[Table], dir: Option<&std::path::Path>) -> Result<(), Failure> {
    match dir {
        Some(dir) => {
            for t in tables {
                let path = t.write_to_dir(dir)?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    writeln!(lock).map_err(|e| Failure::from(Error::from(e)))?;
                }
                t.write(&mut lock)?;
            }
        }
    }
    Ok(())
}
