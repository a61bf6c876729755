pub mod calculus;
pub mod element;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod minsolve;
pub mod piola;
mod ortho;
pub mod polyspace;
pub mod problems;
pub mod quadrature;

pub use error::{Error, Result};
