//! Kinetic transport with independent speed and direction jumps: velocity
//! grids and kernels, scattering operators, homogeneous relaxation, particle
//! simulation, the kinetic solver and the drift-diffusion limits.

pub mod config;
pub mod diagnostics;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod homogeneous;
pub mod kernels;
pub mod kinetic;
pub mod macroscopic;
pub mod moments;
pub mod operators;
pub mod output;
pub mod par;
pub mod particles;
pub mod spatial;
pub mod tensor;

pub use error::{Error, Result};
