//! Trajectory-based training of recurrent networks under box constraints.

pub mod baselines;
pub mod benchmarks;
pub mod constraints;
pub mod error;
pub mod explorer;
pub mod flow;
pub mod harness;
pub mod manifold;
pub mod objective;
pub mod rnn;
pub mod saddle;

pub use constraints::{Bounds, ParameterVector, RnnSpec};
pub use error::{Error, Result};
pub use objective::Objective;
