//! Q-learning synthesis of circuits that prepare representative 4-qubit
//! entangled states.

pub mod catalog;
pub mod error;
pub mod gates;
pub mod postprocess;
pub mod qlearn;
pub mod slg;
pub mod termspace;

pub use error::{Error, Result};
