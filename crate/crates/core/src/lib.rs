//! Group-sparse convex optimization.
//!
//! Greedy group selection (Group OMP and OMP with Replacement), its
//! regularization-based counterparts (Group Sequential LASSO and Group
//! Sequential Attention), column subset selection through row-sparse
//! reconstruction, and a harness that checks the selection rules and
//! approximation bounds against brute-force oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::result_large_err)]

pub mod css;
pub mod error;
pub mod io;
pub mod objectives;
pub mod partition;
pub mod rng;
pub mod selection;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use objectives::Objective;
pub use partition::{group_norms, group_support, Coefficients, GroupPartition};
