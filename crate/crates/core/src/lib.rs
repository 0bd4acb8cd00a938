//! Dense simulation of stabilizer tests, graph-state measurement patterns and
//! the two-message protocols built on them.

pub mod densesim;
pub mod error;
pub mod graphstate;
pub mod hstab;
pub mod linalg;
pub mod mbqc;
pub mod par;
pub mod pauli;
pub mod protocol;
pub mod stabtest;

pub use error::{Error, Result};
