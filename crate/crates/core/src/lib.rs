//! Probabilistic agent programs: parsing, status-set semantics, Kripke-structure
//! execution and p-consistency checking of integrity constraints.

pub mod annotation;
pub mod error;
pub mod exec;
pub mod kripke;
pub mod lp;
pub mod model;
pub mod parser;
pub mod program;
pub mod psem;
pub mod red;
pub mod semantics;
pub mod state;
pub mod strategy;

pub use error::{Error, Result, SourceSpan};
