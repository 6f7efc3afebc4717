//! Conditional copula estimation and tests of the simplifying assumption.

pub mod bootstrap;
pub mod boxes;
pub mod cli;
pub mod cml;
pub mod copulas;
pub mod data;
pub mod dgp;
pub mod error;
pub mod grid;
pub mod mc;
pub mod np_tests;
pub mod rng;
pub mod smoothing;
pub mod special;
pub mod statistic;
pub mod stats;

pub use copulas::{CopulaFamily, CopulaModel};
pub use data::Dataset;
pub use error::{Error, Result};
