pub mod error;
pub mod fiber;
pub mod field;
pub mod fullcap;
pub mod cli;
pub mod critical;
pub mod oracles;
pub mod reduced;
pub mod report;

pub use error::{Error, Result};
