pub mod analysis;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod terrain;

pub use error::{GrlError, Result};
