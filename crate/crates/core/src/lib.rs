//! Low-adaptivity search for stationary points of smooth functions.
//!
//! The core is generic over the scalar type (`f32` or `f64`); the aliases at the
//! bottom fix it to `f64`.

pub mod error;
pub mod geometry;
pub mod gridpath;
pub mod hardchain;
pub mod harness;
pub mod objectives;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod trap;

pub use error::{Error, Result};
pub use geometry::{barrier_slices, is_unreachable, nice_delta_net, HyperRectangle, Net, Point};
pub use oracle::{verify_gradient, BatchSession, Domain, Objective, QueryLedger};
pub use scalar::Scalar;
pub use trap::{compress, gfgt, select_next, GfgtConfig, GfgtOutput, Mode, RunTrace};

pub type Point64 = Point<f64>;
pub type Rect64 = HyperRectangle<f64>;
pub type Net64 = Net<f64>;
pub type GfgtConfig64 = GfgtConfig<f64>;
pub type RunTrace64 = RunTrace<f64>;
