//! Branching-stable integer random variables, point processes and random
//! measures, with samplers, closed-form transforms and the statistical
//! machinery to check stability identities by simulation.

pub mod battery;
pub mod cb;
pub mod diffusion_branch;
pub mod discrete_ops;
pub mod error;
pub mod laws;
pub mod numeric;
pub mod processes;
pub mod rng;
pub mod scenario;
pub mod semigroups;
pub mod stable_pp;
pub mod stattest;

pub use error::{Error, Result};
