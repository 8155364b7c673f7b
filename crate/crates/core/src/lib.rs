//! Quantum (positive-operator-valued) probability on finite sample spaces.
pub mod calculus;
pub mod conditional;
pub mod error;
pub mod herm;
pub mod matrix;
pub mod measure;
pub mod qrv;
pub mod random;

pub use calculus::RNContext;
pub use conditional::ConditionalResult;
pub use error::{QprobError, Result};
pub use herm::{HermitianMatrix, Interval, SpectralDecomposition, Tolerances};
pub use matrix::{Matrix, C64};
pub use measure::{Partition, QuantumMeasure, SampleSpace};
pub use qrv::{DensityMatrix, QuantumRandomVariable};
