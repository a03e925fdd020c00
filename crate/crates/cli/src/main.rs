//! `ezzq`: experiment drivers and an encode/decode pipeline on top of the
//! quantization library.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 when results were
//! produced but some rate-distortion points did not converge.

mod codec;
mod experiments;
mod io;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use ezzq::quant::QuantizerKind;
use io::DataFormat;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

// Library failures during a run mean the data couldn't be processed.
impl From<ezzq::Error> for CliError {
    fn from(e: ezzq::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// The zone quantizer kinds the codec transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum KindArg {
    Ezz,
    #[default]
    Soezz,
    Oezz,
}

impl From<KindArg> for QuantizerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ezz => QuantizerKind::Ezz,
            KindArg::Soezz => QuantizerKind::Soezz,
            KindArg::Oezz => QuantizerKind::Oezz,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ezzq",
    version,
    about = "Source modeling, rate-distortion curves, and adaptive zero-zone quantization"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the source model per subband and report the estimates as CSV
    Estimate {
        /// Coefficient file to analyze
        input: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: DataFormat,
        /// Subband boundary file, one "start,end" per line (default: one band)
        #[arg(long)]
        bands: Option<PathBuf>,
        /// Output CSV path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theoretical vs sampled rate-distortion curves for one shape
    Fig3 {
        /// Shape parameter of the source
        #[arg(long)]
        alpha: f64,
        /// Sample count for the empirical curve
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Lagrangian slopes per curve
        #[arg(long, default_value_t = 41)]
        slopes: usize,
        /// Histogram bins for the empirical source
        #[arg(long, default_value_t = 4001)]
        bins: usize,
        /// Output CSV path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// R(D), both analytic bounds, and the uniform-quantizer curves per shape
    Rdcurves {
        /// Shape parameters, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 41)]
        slopes: usize,
        /// Output directory; one rd_alpha_<shape>.csv per shape
        #[arg(long)]
        out: PathBuf,
    },
    /// Loss-of-gain curves L(R) for the quantizer family per shape
    Losscurves {
        /// Shape parameters, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        /// Sample count for shapes below 1 (measured frontiers)
        #[arg(long, default_value_t = 200_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 41)]
        slopes: usize,
        /// Output directory; one loss_alpha_<shape>.csv per shape
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the adaptive codec's operating-point table as CSV
    SoezzTable {
        /// Shape parameters (default: the codec's built-in grid)
        #[arg(long, value_delimiter = ',', default_values_t = ezzq::adaptive::DEFAULT_ALPHA_GRID)]
        alpha: Vec<f64>,
        /// Output CSV path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adaptively quantize a coefficient file into a container
    Encode {
        /// Coefficient file to encode
        input: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: DataFormat,
        /// Subband boundary file, one "start,end" per line (default: one band)
        #[arg(long)]
        bands: Option<PathBuf>,
        /// Target coding gain in dB below each subband's estimated variance
        #[arg(long, conflicts_with = "target_mse")]
        target_db: Option<f64>,
        /// Target mean squared error, in signal units squared
        #[arg(long)]
        target_mse: Option<f64>,
        #[arg(long, value_enum, default_value_t)]
        kind: KindArg,
        /// Operating-point table CSV (from soezz-table); default: built in-process
        #[arg(long)]
        table: Option<PathBuf>,
        /// Container output path
        #[arg(long)]
        out: PathBuf,
        /// Report CSV path (default: stdout)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Reconstruct a container back into a coefficient file
    Decode {
        /// Container produced by encode
        input: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: DataFormat,
        /// Coefficient output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic coefficient file drawn from the source model
    Generate {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        format: DataFormat,
        /// Coefficient output path
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cmd: Cmd) -> CliResult<usize> {
    match cmd {
        Cmd::Estimate {
            input,
            format,
            bands,
            out,
        } => codec::cmd_estimate(&input, format, bands.as_deref(), out.as_deref()),
        Cmd::Fig3 {
            alpha,
            n,
            seed,
            slopes,
            bins,
            out,
        } => experiments::cmd_fig3(alpha, n, seed, slopes, bins, out.as_deref()),
        Cmd::Rdcurves { alpha, slopes, out } => experiments::cmd_rdcurves(&alpha, slopes, &out),
        Cmd::Losscurves {
            alpha,
            n,
            seed,
            slopes,
            out,
        } => experiments::cmd_losscurves(&alpha, n, seed, slopes, &out),
        Cmd::SoezzTable { alpha, out } => experiments::cmd_soezz_table(&alpha, out.as_deref()),
        Cmd::Encode {
            input,
            format,
            bands,
            target_db,
            target_mse,
            kind,
            table,
            out,
            report,
        } => {
            let target = match (target_db, target_mse) {
                (Some(db), None) => codec::Target::GainDb(db),
                (None, Some(mse)) => codec::Target::Mse(mse),
                _ => {
                    return Err(CliError::usage(
                        "exactly one of --target-db and --target-mse is required",
                    ));
                }
            };
            codec::cmd_encode(
                &input,
                format,
                bands.as_deref(),
                target,
                kind.into(),
                table.as_deref(),
                &out,
                report.as_deref(),
            )
        }
        Cmd::Decode { input, format, out } => codec::cmd_decode(&input, format, &out),
        Cmd::Generate {
            alpha,
            sigma2,
            n,
            seed,
            format,
            out,
        } => codec::cmd_generate(alpha, sigma2, n, seed, format, &out),
    }
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(0) => 0,
        Ok(unconverged) => {
            eprintln!(
                "warning: {unconverged} rate-distortion point(s) stopped above the \
                 convergence tolerance; results written, treat them as approximate"
            );
            3
        }
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{e}");
            1
        }
        Err(e @ CliError::Data(_)) => {
            eprintln!("{e}");
            2
        }
    }
}

fn main() {
    std::process::exit(run());
}
