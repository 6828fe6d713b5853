//! Pieces of the `heatlens` binary that tests drive directly.

pub mod data;
pub mod report;
