//! Circuit synthesis over partitioned qubit registers with exact accounting of
//! cross-party ("straddling") two-qubit gates.

pub mod certifier;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod multiplexor;
pub mod par;
pub mod qsd;
pub mod report;
pub mod schmidt;
pub mod stateprep;

pub use error::{Error, Result};
