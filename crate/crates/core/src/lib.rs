pub mod bench;
pub mod cli;
pub mod codec;
pub mod codes;
pub mod encoder;
pub mod error;
pub mod learn;
pub mod pca;
pub mod pipeline;
pub mod qubo;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use qubo::{BitCode, QuboProblem};
pub use solver::{BetaRange, ExactSolver, SaParams, Solution, Solver};
