//! Adaptive spectral Koopman (ASK) solver for autonomous ODE systems in one
//! to three dimensions.
//!
//! The Koopman generator `f · ∇` is discretized by Chebyshev collocation on
//! a box around the current state, eigendecomposed, and the identity
//! observable is expanded in the resulting eigenvectors. The state at any
//! later time is then an exponential sum, rebuilt adaptively whenever the
//! trajectory drifts too far from the box center.

pub mod ask;
pub mod collocation;
pub mod error;
pub mod generator;
pub mod harness;
pub mod models;
pub mod reference;
pub mod spectral;

pub use ask::{accept_check, ask_solve, AskConfig, AskSolution, Neighborhood};
pub use error::{Error, Result};
pub use models::{DynamicalSystem, ModelRegistry};
