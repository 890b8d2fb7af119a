//! `mcs`: multicoset spectrum-sensing simulator.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 malformed
//! input data, 3 acceptance failure.

mod commands;
mod config;
mod error;
mod manifest;

use clap::{Args, Parser, Subcommand};
use config::Settings;
use error::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mcs", version, about = "Multicoset sub-Nyquist spectrum sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value config file, or a manifest.json from an earlier run
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a single setting; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory [default: $MCS_OUT_DIR, else ./mcs-out]
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Detection probability versus occupancy (Monte-Carlo sweep)
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Pattern file written by `mcs pattern`
        #[arg(long, value_name = "FILE")]
        pattern: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<String>,
        #[arg(long)]
        trials: Option<String>,
        /// Comma-separated occupancies in MHz
        #[arg(long, value_name = "LIST")]
        occupancies: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Reconstruct the spectrum of one snapshot file
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Grid-signal or lane-block container
        input: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        pattern: Option<PathBuf>,
        #[arg(short, long)]
        decimation: Option<String>,
        #[arg(long)]
        window: Option<String>,
    },
    /// Synthesize a multiband test signal
    Gensig {
        #[command(flatten)]
        common: Common,
        /// Band as CENTER_MHZ:WIDTH_MHZ; repeatable
        #[arg(long = "band", value_name = "C:W", allow_hyphen_values = true)]
        bands: Vec<String>,
        /// Auto-place this much occupancy when no bands are given
        #[arg(long)]
        occupancy_mhz: Option<String>,
        #[arg(long, value_name = "FILE")]
        pattern: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<String>,
        /// `grid` (full-rate signal) or `lanes` (sampled lane block)
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Check that the two sampling architectures give the same spectra
    Equivalence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<String>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Generate a sampling pattern and report its coherence
    Pattern {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'p', long)]
        lanes: Option<String>,
        #[arg(short = 'l', long)]
        grid: Option<String>,
        /// `random` or `greedy`
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
}

fn layered(mut s: Settings, common: &Common) -> Result<Settings> {
    if let Some(path) = &common.config {
        s.load_file(path)?;
    }
    for pair in &common.set {
        s.set_pair(pair)?;
    }
    s.set_flag("output.dir", common.out.as_ref().map(|p| p.display()))?;
    Ok(s)
}

fn path_flag(s: &mut Settings, key: &str, p: &Option<PathBuf>) -> Result<()> {
    s.set_flag(key, p.as_ref().map(|p| p.display()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            common,
            pattern,
            snr_db,
            trials,
            occupancies,
            seed,
        } => {
            let mut s = layered(commands::simulate_settings(), &common)?;
            path_flag(&mut s, "pattern.file", &pattern)?;
            s.set_flag("snr_db", snr_db)?;
            s.set_flag("trials", trials)?;
            s.set_flag("occupancies_mhz", occupancies)?;
            s.set_flag("seed", seed)?;
            commands::simulate(s)
        }
        Command::Reconstruct {
            common,
            input,
            pattern,
            decimation,
            window,
        } => {
            let mut s = layered(commands::reconstruct_settings(), &common)?;
            path_flag(&mut s, "input", &input)?;
            path_flag(&mut s, "pattern.file", &pattern)?;
            s.set_flag("decimation", decimation)?;
            s.set_flag("window", window)?;
            commands::reconstruct(s)
        }
        Command::Gensig {
            common,
            bands,
            occupancy_mhz,
            pattern,
            snr_db,
            format,
            seed,
        } => {
            let mut s = layered(commands::gensig_settings(), &common)?;
            s.set_flag("bands_mhz", (!bands.is_empty()).then(|| bands.join(",")))?;
            s.set_flag("occupancy_mhz", occupancy_mhz)?;
            path_flag(&mut s, "pattern.file", &pattern)?;
            s.set_flag("snr_db", snr_db)?;
            s.set_flag("format", format)?;
            s.set_flag("seed", seed)?;
            commands::gensig(s)
        }
        Command::Equivalence {
            common,
            trials,
            window,
            seed,
        } => {
            let mut s = layered(commands::equivalence_settings(), &common)?;
            s.set_flag("trials", trials)?;
            s.set_flag("window", window)?;
            s.set_flag("seed", seed)?;
            commands::equivalence(s)
        }
        Command::Pattern {
            common,
            lanes,
            grid,
            strategy,
            seed,
        } => {
            let mut s = layered(commands::pattern_settings(), &common)?;
            s.set_flag("pattern.lanes", lanes)?;
            s.set_flag("pattern.grid", grid)?;
            s.set_flag("pattern.strategy", strategy)?;
            s.set_flag("pattern.seed", seed)?;
            commands::pattern(s)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

