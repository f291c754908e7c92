//! Hard instances: a smooth chain function hiding a random partition of the coordinates.

pub mod chain;
pub mod components;
pub mod concentration;
pub mod partition;
pub mod properties;
pub mod scaling;

pub use chain::{chain_potential, progress_index, rho, ChainEval, ChainOracle, ProgressVector, DEFAULT_L1};
pub use components::{component_suite, phi, phi_prime, psi, psi_prime, Components, PropertyCheck};
pub use concentration::{concentration_probe, tail_bound, TailEstimate, TestVector};
pub use partition::ChainPartition;
pub use scaling::{make_scaled_oracle, min_dimension, scaled_parameters, ScaledParameters};
