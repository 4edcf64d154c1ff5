//! Chart-to-table benchmark toolkit: rendering, model querying, scoring,
//! analysis and the acceptance checks, on top of `chartbench-core`.

pub use chartbench_core as core;

pub mod analysis;
pub mod cli;
pub mod client;
pub mod filter;
pub mod io;
pub mod render;
pub mod score;
pub mod verify;
