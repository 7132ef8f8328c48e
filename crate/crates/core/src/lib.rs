pub mod closure;
pub mod error;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod parallel;
pub mod pauli;
pub mod propagation;
pub mod scenarios;
pub mod sector;
pub mod trotter;

pub use error::{Error, Result};
