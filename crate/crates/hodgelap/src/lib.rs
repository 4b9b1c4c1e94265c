pub mod bases;
pub mod boundary;
pub mod chain_ops;
pub mod collapse;
pub mod complex;
pub mod embedding;
pub mod error;
pub mod generate;
pub mod graph_solver;
pub mod harmonic;
pub mod graphs;
pub mod linop;
pub mod oracle;
pub mod report;
pub mod scx;
pub mod solver;

pub use error::{Error, Result};
