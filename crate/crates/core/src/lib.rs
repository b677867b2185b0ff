pub mod analysis;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod inversion;
pub mod linalg;
pub mod quadrature;
pub mod stereo;
pub mod transforms;
pub mod zonal;

pub use error::{Error, Result};
