//! Reward-cum-penalty epsilon-SVR (RP-eps-SVR) and the standard eps-SVR.
//!
//! The crate covers the loss family, a reduced dual QP with an SMO-style
//! solver and two independent oracles, kernel training and prediction,
//! the usual regression metrics, seeded synthetic benchmarks and a
//! cross-validated grid-search harness.

pub mod data;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod loss;
pub mod metrics;
pub mod qp;
pub mod svr;
pub mod synth;

pub use error::{Error, Result};
