//! File formats, multi-chain orchestration and the command-line interface
//! for [`bvsr_core`].

pub mod cli;
pub mod io;
pub mod output;
pub mod runner;
