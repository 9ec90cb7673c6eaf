//! Library side of the `driftbench` command: config parsing and the
//! `generate`, `evaluate` and `leaderboard` commands.

pub mod commands;
pub mod config;

pub use commands::{evaluate, generate, leaderboard, EvaluateOptions, Submission};
pub use config::RunConfig;
