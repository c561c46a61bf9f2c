mod checkpoint;
mod commands;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cannonball::exactseq::DEFAULT_BITS;
use cannonball::parallel::DEFAULT_CHUNK;

use crate::emit::Format;

#[derive(Parser, Debug)]
#[command(name = "cannonball", version, about = "Distances from square pyramidal numbers to their closest squares")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "CANNONBALL_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,

    /// Indices per work unit.
    #[arg(long, global = true, default_value_t = DEFAULT_CHUNK, value_parser = clap::value_parser!(u64).range(1..))]
    pub chunk: u64,

    /// Output format (csv by default, json for optimize).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Resolved terms n, P_n, ⌊√P_n⌋, y_n, a_n, side.
    Terms {
        #[arg(long, value_parser = parse_range)]
        range: (u64, u64),
    },
    /// Exact M_k(x) against its main term.
    Moments {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
        /// One or more orders, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<u32>,
        #[command(flatten)]
        resume: ResumeArgs,
    },
    /// A(x) = M_1(x)/x exactly and against x^{3/2}/(5√3).
    Average {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
        #[command(flatten)]
        resume: ResumeArgs,
    },
    /// Certified lower and upper bounds for M_k(x) from L distance bins.
    Sandwich {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long = "L")]
        l: u64,
        #[command(flatten)]
        resume: ResumeArgs,
    },
    /// Star discrepancy of the first x points, optionally with Erdős–Turán bounds.
    Discrepancy {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
        /// Erdős–Turán truncations, comma separated.
        #[arg(long = "K", value_delimiter = ',')]
        k_trunc: Vec<u64>,
        #[arg(long, value_enum, default_value = "frac")]
        sequence: Sequence,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        bits: u32,
    },
    /// |Σ_{n≤x} e(m√P_n)|/x for m = 1..m_max.
    Weyl {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
        #[arg(long = "m-max", value_parser = clap::value_parser!(u64).range(1..))]
        m_max: u64,
    },
    /// Exponential sums over a range next to the second-derivative bound.
    Knbound {
        #[arg(long, value_parser = parse_range)]
        range: (u64, u64),
        #[arg(long = "m-max", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        m_max: u64,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        bits: u32,
    },
    /// Indices n ≤ x whose closest square is not the one nearest to √P_n.
    Exceptional {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
    },
    /// Count of n ≤ x with |{√P_n} - 1/2| ≤ x^{-3/4}.
    Nearhalf {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        bits: u32,
    },
    /// Histogram of |√P_n - y_n| over [0, 1/2].
    Histogram {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        x: u64,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Balance monomial terms in exact exponent arithmetic.
    Optimize {
        /// "F=x:5/2,K:-1/2;G=x:19/8,K:1/4[;G=...]"
        #[arg(long, conflicts_with = "terms", requires = "var")]
        exponent: Option<String>,
        #[arg(long)]
        var: Option<String>,
        /// Semicolon-separated terms of a sum to optimize variable by variable.
        #[arg(long, requires = "eliminate")]
        terms: Option<String>,
        /// Variables to eliminate in order, comma separated.
        #[arg(long, value_delimiter = ',')]
        eliminate: Vec<String>,
    },
    /// Log-log slope of |M_k(x) - main| over the given x values.
    Fit {
        #[arg(long, value_delimiter = ',', required = true)]
        xs: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ResumeArgs {
    /// Checkpoint file; an existing one is resumed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Directory for automatically named checkpoints.
    #[arg(long = "checkpoint-dir", env = "CANNONBALL_CHECKPOINT_DIR")]
    pub checkpoint_dir: Option<PathBuf>,
    /// Indices between checkpoints.
    #[arg(long = "checkpoint-every", default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub checkpoint_every: u64,
    #[arg(long = "stop-after", hide = true)]
    pub stop_after: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sequence {
    /// {√P_n}
    Frac,
    /// 2·|√P_n - y_n|
    Half,
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: u64 = a.trim().parse().map_err(|_| format!("bad lower end {a:?}"))?;
    let hi: u64 = b.trim().parse().map_err(|_| format!("bad upper end {b:?}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("need 1 ≤ lo ≤ hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(commands::Status::Complete) => ExitCode::SUCCESS,
        Ok(commands::Status::Stopped(n)) => {
            eprintln!("stopped after n = {n}; rerun with the same checkpoint to resume");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
