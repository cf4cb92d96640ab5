//! Compile requirement-driven domain descriptions into discounted Markov
//! decision processes, solve them, and simulate the resulting controllers.
//!
//! The pipeline is [`dsl::parse_domain`] → [`compiler::compile`] →
//! [`solver::value_iteration`] or [`solver::policy_iteration`] →
//! [`sim::run`].

pub mod compiler;
pub mod dsl;
pub mod io;
mod linsolve;
pub mod par;
pub mod prob;
pub mod reqauto;
pub mod sim;
pub mod solver;
pub mod space;
pub mod sparse;

pub use par::Execution;
