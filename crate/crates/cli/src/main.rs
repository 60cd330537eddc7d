use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scldpcl::de::{DeConfig, Direction};

mod commands;
mod output;
mod reproduce;

use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] scldpcl::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(scldpcl::Error::NonConvergence { .. }) => 2,
            CliError::Mismatch(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "scldpcl", version, about = "Thresholds and Markov-channel success bounds for SC-LDPCL protographs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Left,
    Right,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Left => Direction::LeftHelper,
            DirectionArg::Right => Direction::RightHelper,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DeFlags {
    /// Bisection width for every threshold search.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for a single density-evolution run.
    #[arg(long)]
    max_iters: Option<usize>,
}

impl DeFlags {
    pub fn config(&self) -> Result<DeConfig, CliError> {
        let mut cfg = DeConfig::default();
        if let Some(t) = self.tol {
            cfg.bisect_width = t;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sub-block thresholds, symmetry, semi-global thresholds and q values.
    Analyze {
        protograph: PathBuf,
        #[arg(long, value_enum, default_value = "left")]
        direction: DirectionArg,
        /// Channel parameters at which to report q.
        #[arg(long, value_delimiter = ',')]
        q_at: Vec<f64>,
        /// Use a uniform domination grid with this many points per dimension
        /// for the second threshold instead of the all-erasure orbit.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        de: DeFlags,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Erasure-transfer function over a grid of incoming values.
    TransferSweep {
        protograph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Grid points per coupling check, evenly spaced over [0, 1].
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, value_enum, default_value = "left")]
        direction: DirectionArg,
        #[command(flatten)]
        de: DeFlags,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Thresholds of every non-equivalent symmetric edge-spreading design.
    DesignSearch {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        t_max: usize,
        /// Number of coupled sub-blocks for the global threshold.
        #[arg(short = 'M', long = "m", default_value_t = 50)]
        m: usize,
        /// Channel parameter at which q is reported.
        #[arg(long)]
        eps0: f64,
        /// Keep only t >= 2 designs whose coupling rows share at least this many columns.
        #[arg(long)]
        min_overlap: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        de: DeFlags,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// One- and two-sided semi-global success bounds over a Markov channel.
    Markov {
        protograph: PathBuf,
        channel: PathBuf,
        #[arg(long, default_value_t = 0)]
        d_min: usize,
        #[arg(long, default_value_t = 30)]
        d_max: usize,
        #[arg(long, default_value_t = 2)]
        d_step: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: MarkovMode,
        /// Use this q instead of the one derived from the error-reducing states.
        #[arg(long)]
        q: Option<usize>,
        #[arg(long, value_enum, default_value = "left")]
        direction: DirectionArg,
        #[command(flatten)]
        de: DeFlags,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Recomputes a published table or figure and diffs it against the stored values.
    Reproduce {
        #[arg(value_enum)]
        artifact: reproduce::Artifact,
        /// Directory for the generated CSV files.
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarkovMode {
    OneSided,
    TwoSided,
    Both,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            protograph,
            direction,
            q_at,
            grid,
            de,
            format,
            output,
        } => commands::analyze(&commands::AnalyzeArgs {
            protograph,
            direction,
            q_at,
            grid,
            cfg: de.config()?,
            format,
            output,
        }),
        Command::TransferSweep {
            protograph,
            eps,
            points,
            direction,
            de,
            format,
            output,
        } => commands::transfer_sweep(&commands::SweepArgs {
            protograph,
            eps,
            points,
            direction,
            cfg: de.config()?,
            format,
            output,
        }),
        Command::DesignSearch {
            l,
            r,
            t_max,
            m,
            eps0,
            min_overlap,
            grid,
            de,
            format,
            output,
        } => commands::design_search(&commands::DesignArgs {
            l,
            r,
            t_max,
            m,
            eps0,
            min_overlap,
            grid,
            cfg: de.config()?,
            format,
            output,
        }),
        Command::Markov {
            protograph,
            channel,
            d_min,
            d_max,
            d_step,
            mode,
            q,
            direction,
            de,
            format,
            output,
        } => commands::markov(&commands::MarkovArgs {
            protograph,
            channel,
            d_min,
            d_max,
            d_step,
            mode,
            q,
            direction,
            cfg: de.config()?,
            format,
            output,
        }),
        Command::Reproduce { artifact, output } => reproduce::run(artifact, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports usage errors with status 2, which is reserved here
            // for non-convergence.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
