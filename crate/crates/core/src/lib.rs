//! Simulation and diagnostics for a g-function with summable variation that
//! carries long-range memory through a hierarchy of block patterns.

pub mod blockscan;
pub mod blockstats;
pub mod chain;
pub mod cli;
pub mod error;
pub mod gfun;
pub mod params;
pub mod phaselab;
pub mod report;
pub mod varlab;
pub mod window;

pub use error::{Error, Result};
