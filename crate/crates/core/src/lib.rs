pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod gpr;
pub mod kernels;
pub mod mesh;
pub mod optimize;

pub use error::{Error, Result};
