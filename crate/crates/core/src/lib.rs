pub mod error;
pub mod numerics;
pub mod pauli;

pub use error::{Error, Result};
pub mod subspace;
pub mod channel;
pub mod markov;
pub mod model;
pub mod sampler;
pub mod bottleneck;
pub mod stability;
pub mod config;
pub mod run;
