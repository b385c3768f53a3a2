//! Variance-reduced three-operator splitting.

pub mod data;
pub mod diagnostics;
pub mod cli;
pub mod memory;
pub mod model;
pub mod oracle;
pub mod penalties;
pub mod solvers;
pub mod structure;
