pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod problem;
pub mod prox;
pub mod schedule;
pub mod solvers;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
