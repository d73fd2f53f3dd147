//! certiqp: box-constrained QP solving with certified execution cost, plus
//! an ℓ1 penalty front end for always-feasible model predictive control.
//!
//! The pipeline, front to back:
//!
//! * [`mpc`] condenses a linear MPC problem (dynamics, weights, input
//!   bounds, state half-space constraints) into a dense QP over the input
//!   sequence.
//! * [`penalty`] replaces the inequality constraints by an exact ℓ1
//!   penalty and transforms the result into a QP over the unit box. For a
//!   large enough penalty vector the soft solution coincides with the hard
//!   one, and it stays well defined when the hard problem is infeasible.
//! * [`boxqp`] solves the box QP with a feasible full-Newton interior-point
//!   method whose iteration count is fixed by (n, ε) alone.
//! * [`certificate`] turns that fixed count into an exact a-priori flop
//!   budget and execution-time estimate, which [`flops`]' measured counters
//!   must reproduce.
//! * [`sim`] closes the loop: condense once, cache the time-invariant
//!   pieces, solve every step, log a trajectory.
//!
//! [`linalg`] carries the flop-counted dense kernels underneath it all.

pub mod boxqp;
pub mod certificate;
pub mod error;
pub mod flops;
pub mod linalg;
pub mod mpc;
pub mod penalty;
pub mod sim;

pub use error::{Error, Result};
