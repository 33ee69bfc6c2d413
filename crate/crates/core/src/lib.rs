//! Simulation laboratory for the repeated balls-into-bins (RBB) process.
//!
//! Each round, every non-empty bin releases one ball, which is re-allocated to
//! a bin chosen uniformly at random. The crate provides the process engine,
//! potential-function observables, a FIFO traversal variant, an exact Markov
//! chain oracle for tiny instances, statistical checks of the process's drift
//! inequalities, and the experiment harness behind the `rbb` binary.

pub mod engine;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod load;
pub mod observables;
pub mod plot;
pub mod rng;
pub mod stats;
pub mod suite;
pub mod traversal;
pub mod validation;

pub use engine::{coupled_step, idealized_step, one_choice_run, rbb_step, run_trace, Process, SampleBatch, Simulation};
pub use error::{RbbError, Result};
pub use load::{InitialConfig, LoadVector, MAX_BALLS};
pub use rng::{RandomSource, Sampler};
