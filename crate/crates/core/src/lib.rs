//! Single-image super-resolution with a hyper-Laplacian natural image prior.
//!
//! A residual CNN ([`net`]) is trained ([`train`]) against squared error plus
//! a sparse-gradient penalty ([`prior`]). The same prior drives a pixel-space
//! MAP solver ([`mapsr`]). See the `book/` directory for a guided tour.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod image;
pub mod mapsr;
pub mod net;
pub mod prior;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
