//! Experiment drivers behind the command-line front end.

pub mod chain_bench;
pub mod grid_bench;
pub mod solve;
pub mod verify;

pub use chain_bench::{run_chain_bench, Baseline, ChainBenchConfig, ChainBenchResult};
pub use grid_bench::{run_grid_bench, wilson_interval, GridBenchConfig, GridBenchResult};
pub use solve::{loglog_slope, per_round_exponent, query_scaling, run_solve, solve_trial, Builtin, SolveConfig, SolveSummary};
pub use verify::{gradient_agreement, gridpath_suite, verify_all, SuiteReport};
