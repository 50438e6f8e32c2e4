//! Fourier neural mappings: neural operators between function and vector
//! spaces built from spectral convolution layers, with exact reverse-mode
//! gradients, training loops, and checkpointing.

pub mod checkpoint;
pub mod grid;
pub mod layers;
pub mod loss;
pub mod model;
pub mod spectral;
pub mod train;
