//! Expected run-time analysis for a probabilistic guarded-command language.
//!
//! The [`ert`] module computes the expected run-time transformer, the
//! [`invariants`] module checks loop invariants, and [`mdp`] builds the
//! operational Markov decision process and its expected rewards so the two
//! can be compared.

pub mod corpus;
pub mod error;
pub mod ert;
pub mod gen;
pub mod invariants;
pub mod kernel;
pub mod lang;
pub mod linsys;
pub mod mdp;
pub mod props;
pub mod report;

pub use error::{Error, EvalError};
pub use kernel::{Rational, State, Value, XReal};
