//! Exact propagators, error phases and bound checks for dynamically decoupled
//! quantum logic on small qubit registers coupled to finite baths.

pub mod bounds;
pub mod decoupling;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod magnus;
pub mod model;
pub mod pauli;
pub mod random;

pub use error::{Error, Result};
