pub mod detector;
pub mod eval;
pub mod cli;
pub mod config;
pub mod error;
pub mod interaction;
pub mod pipeline;
pub mod preprocess;
pub mod reasoner;
pub mod rng;
pub mod scenario;
pub mod scene;
pub mod uncertainty;

pub use error::{Error, Result};
