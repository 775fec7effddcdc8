pub mod averaging;
pub mod earm;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod problem;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testing;
