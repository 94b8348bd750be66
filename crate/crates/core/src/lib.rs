//! Facial privacy protection by adversarial perturbation on and off the
//! face manifold.
//!
//! The building blocks are [`image::ImageTensor`], texture and hair masks in
//! [`masking`], differentiable embedders in [`embedding`], generative models
//! in [`manifold`], and the attack family in [`attacks`]. [`evaluation`]
//! holds the metrics; [`zoo`] resolves components by name.

pub mod attacks;
pub mod blur;
pub mod convnet;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod linalg;
pub mod manifold;
pub mod masking;
pub mod nn;
pub mod synth;
pub mod zoo;

pub use error::{Error, Result};
pub use image::ImageTensor;
