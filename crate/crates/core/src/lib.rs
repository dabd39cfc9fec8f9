pub mod error;
pub mod genmat;
pub mod harness;
pub mod io;
pub mod leverage;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
