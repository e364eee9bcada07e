pub mod basis;
pub mod cli;
pub mod curved;
pub mod error;
pub mod harness;
pub mod io;
pub mod piecewise;
pub mod poles;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
