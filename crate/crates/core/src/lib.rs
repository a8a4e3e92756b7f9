//! Exact discrete-time models of LTI plants with fractional input/output
//! delays, a fixed-step simulator of a multirotor altitude loop, and a DDPG
//! implementation for comparing delay-aware and delay-naive observation
//! regimes.

pub mod augment;
pub mod config;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod eval;
pub mod lti;
pub mod sim;

pub use error::{Error, Result};
