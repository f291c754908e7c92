//! Monotone path functions on grid graphs and round-limited local search on them.

pub mod path;
pub mod search;

pub use path::{local_minima, reduction_budget, square, square_tiling_check, GridGraph, MonotonePath, PathOracle};
pub use search::{hard_query_scale, round_limited_search, SearchOutcome, Strategy};
