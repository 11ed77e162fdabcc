//! Schedule-independent lower bounds on quantum annealing times and QAOA
//! circuit depth, with exact dense simulation of small annealers and a
//! BFGS-based schedule optimizer to probe how tight the bounds are.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod models;
pub mod optimize;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
