//! Open quantum system dynamics for a few qubits, trace-distance quantum,
//! classical and total correlations, and non-Markovianity quantifiers built
//! from the positive variation of those correlations.

pub mod channels;
pub mod cli;
pub mod correlations;
pub mod dynamics;
pub mod error;
pub mod nonmarkov;
pub mod qmath;
pub mod states;

pub use error::{Error, Result};
