//! Gradual self-training laboratory.
//!
//! Builds paths of gradually shifting domains, measures their Wasserstein
//! shift profiles, runs gradual self-training along them, and evaluates the
//! resulting generalization bounds numerically.

pub mod datasets;
pub mod error;
pub mod harness;
pub mod model;
pub mod numfmt;
pub mod seeding;
pub mod selftrain;
pub mod theory;
pub mod transport;

pub use error::{Error, Result};
