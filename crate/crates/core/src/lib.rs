pub mod acceptance;
pub mod cli_harness;
pub mod density_contraction;
pub mod empirical;
pub mod error;
pub mod parallel;
pub mod simulator;
pub mod hydro_pde;
pub mod profile;
pub mod rate_functional;
pub mod rates;

pub use error::{Error, Result};
