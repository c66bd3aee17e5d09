//! Pattern-aided regression (CPXR) and pedotransfer-function modelling.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, the command line or threads lives in the `cpxr-ptf`
//! companion crate; this crate holds the numerical and combinatorial core:
//!
//! - [`dataset`]: samples, datasets, column selection and fold assignment
//! - [`discretize`]: supervised MDL (entropy) discretization of features
//! - [`patterns`]: items, patterns, contrast-pattern mining and filtering
//! - [`linreg`]: least squares / ridge regression with standardization
//! - [`cpxr`]: the pattern-aided regression model and its training loop
//! - [`hydrology`]: van Genuchten retention model, curve fitting, texture
//!   statistics and the eight model configurations
//! - [`evaluation`]: metrics and repeated cross-validation
//! - [`synth`]: synthetic soil populations with known regimes
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bitset;
pub mod cpxr;
pub mod dataset;
pub mod discretize;
pub mod evaluation;
pub mod hydrology;
pub mod linreg;
pub mod matrix;
pub mod patterns;
pub mod synth;

mod math;

pub use cpxr::{CpxrConfig, PxrModel};
pub use dataset::{Dataset, Sample};
pub use hydrology::{ConfigId, ModelConfig, VgParameters};
pub use linreg::LinearModel;
pub use matrix::Matrix;
