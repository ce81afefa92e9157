//! Unsupervised single-image defogging: a small reverse-mode autodiff engine,
//! the defogging / synthesizing / attention-fusion generators and PatchGAN
//! discriminators built on it, the atmospheric scattering model, derived-input
//! preprocessing, training objectives and image quality metrics.
//!
//! The crate is `no_std` (with `alloc`). File formats, PNG I/O, the training
//! driver and the command line live in the `haan` companion crate.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod asm;
pub mod autodiff;
pub mod derived;
mod error;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod optim;
pub mod params;
mod real;
pub mod synthetic;
mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use real::Real;
pub use tensor::Tensor;
