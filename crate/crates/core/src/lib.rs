//! Doubly nonnegative relaxations of the cardinality-constrained standard
//! quadratic program, an ADMM conic solver for them, generators of
//! instances with certified properties, and exact enumeration oracles.

pub mod bench;
pub mod conic;
pub mod error;
pub mod formulations;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod report;

pub use error::{Error, Result};
