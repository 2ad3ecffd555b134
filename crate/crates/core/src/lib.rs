//! Safe zero-order-hold control synthesis for control-affine systems with
//! unknown dynamics.
//!
//! The synthesized controller never evaluates the plant. At each sampling
//! instant it picks one recorded triple, widens the triple's finite-difference
//! rate into an interval that provably contains the true rate, and certifies a
//! held input against a barrier condition that accounts for both the interval
//! and the intra-period drift of the state.

pub mod barrier;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod controller;
pub mod dataset;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod plant;
pub mod plot;
pub mod qp;
pub mod region;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
