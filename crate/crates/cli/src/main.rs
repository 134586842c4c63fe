mod cache;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "catlab", version, about = "Quantum cat map experiments on the discrete torus")]
struct Cli {
    /// Propagator cache directory (overrides CATLAB_CACHE_DIR).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Always rebuild propagators and never touch the cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Directory for CSV and JSON result files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpaceArgs {
    /// Matrix entries a,b,c,d of [[a, b], [c, d]].
    #[arg(long)]
    map: String,
    /// Lattice offset "k1,k2" or "auto".
    #[arg(long, default_value = "auto")]
    kappa: String,
    /// Seed for the intertwiner build.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Periods of the map modulo every N in a range.
    Period {
        #[arg(long)]
        map: String,
        /// Inclusive range "lo:hi".
        #[arg(long)]
        range: String,
        /// Short-period flag threshold on P(N)/log N.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Build (or load) a propagator and report its residuals.
    Build {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        n: usize,
        /// Egorov check over 1 ≤ |n| ≤ this radius.
        #[arg(long, default_value_t = 4)]
        check_degree: usize,
        /// Also write the matrix entries as propagator.csv.
        #[arg(long)]
        matrix: bool,
    },
    /// Eigenphases and degeneracy clusters.
    Spectrum {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        n: usize,
        /// Seed for random rotations inside clusters.
        #[arg(long)]
        basis_seed: Option<u64>,
        /// Clustering tolerance on eigenphases.
        #[arg(long)]
        cluster_tol: Option<f64>,
    },
    /// p-moments of eigenstate matrix elements.
    Moments {
        #[command(flatten)]
        space: SpaceArgs,
        /// Comma-separated N values.
        #[arg(long)]
        n: String,
        #[arg(long)]
        degree: usize,
        /// Comma-separated exponents.
        #[arg(long, default_value = "2")]
        p: String,
        /// generic, rotated:SEED or hecke:GENERATORS:CAP:SEED.
        #[arg(long, default_value = "generic")]
        basis: String,
    },
    /// Exceptional-set scan driven by a TOML config.
    Qescan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Position-space mass sandwich driven by a TOML config.
    Physscan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Commutant family, joint eigenbasis and its moments.
    Hecke {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        n: usize,
        /// Cap on the commutant enumeration.
        #[arg(long, default_value_t = 4096)]
        cap: usize,
        #[arg(long, default_value_t = 2)]
        generators: usize,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 1)]
        basis_seed: u64,
    },
    /// Certification report for a majorant/minorant pair.
    MajorantCheck {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        degree: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
