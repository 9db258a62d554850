//! Usage-model-driven test generation.
//!
//! A usage model describes the operating conditions a system meets as a
//! chain of conditional probability tables over equivalence-class
//! partitioned parameters, plus forbidden class combinations. From it this
//! crate:
//!
//! - enumerates the exact joint distribution on desk-scale models
//!   ([`exact`]), which serves as the oracle for everything else;
//! - samples configurations with random-scan and periodic Gibbs samplers
//!   ([`sampler`]) driven by a pinned, seedable PRNG ([`rng`]);
//! - assembles the samplers' exact transition kernels and checks
//!   stationarity, reversibility, ergodicity and Dobrushin contraction
//!   ([`convergence`]);
//! - turns all of it into deduplicated, requirement-traced test campaigns
//!   with coverage metrics ([`campaign`]).
//!
//! Each capability has a runnable program under `examples/`; the
//! `usage-testgen` binary exposes the pipeline on the command line.

pub mod campaign;
pub mod canon;
pub mod cli;
pub mod convergence;
mod error;
pub mod exact;
pub mod io;
pub mod model;
pub mod reference;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use io::{parse_model, serialize_model};
pub use model::{validate_model, Configuration, Model, UsageModel};
