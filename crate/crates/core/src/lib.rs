pub mod error;
pub mod estimators;
pub mod fit;
pub mod fnm;
pub mod qoi;
pub mod rates;
pub mod risk;
pub mod spectrum;

pub use error::{Error, Result};
