//! Front end for the strong Ramsey engine: proof runs, solving, terminal
//! play and the HTTP game service.

pub mod api;
mod commands;
mod play;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
}

#[derive(Parser, Debug)]
#[command(
    name = "strong-ramsey",
    version,
    about = "Strong Ramsey game on the infinite complete graph, target K^_{2,t}"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Certify the scripted first-player strategy from the empty board.
    VerifyTheorem,
    /// Certify the strategy from the position given by --position.
    Verify,
    /// Bounded solve of --position (or the empty board for --t).
    Solve,
    /// Play against the engine on stdin/stdout, one move per line.
    Play,
    /// Serve the HTTP game API on --port.
    Serve,
    /// Render a certificate as Graphviz.
    ExportDot { cert: PathBuf },
    /// Re-check a certificate file independently of the strategy.
    CheckCert { cert: PathBuf },
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// Target parameter t of K^_{2,t}.
    #[arg(long, global = true)]
    pub t: Option<u32>,
    /// Ply bound for search and verification.
    #[arg(long = "max-plies", global = true)]
    pub max_plies: Option<u32>,
    /// Node budget for bounded search.
    #[arg(long = "node-budget", global = true)]
    pub node_budget: Option<u64>,
    /// Position JSON file.
    #[arg(long, global = true)]
    pub position: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized engine replies.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = 8080)]
    pub port: u16,
    /// Side the human plays.
    #[arg(long = "as", global = true, value_enum, default_value_t = Side::P2)]
    pub side: Side,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    P1,
    P2,
}
