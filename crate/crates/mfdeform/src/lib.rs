//! Exact computations for superfiltered A∞-deformations of exterior
//! algebras, matrix factorisations, homotopy transfer and Hochschild
//! cohomology.

pub mod ainfinity;
pub mod error;
pub mod exterior;
pub mod gen;
pub mod hochschild;
pub mod json;
pub mod linalg;
pub mod lmf;
pub mod mf;
pub mod scalar;
pub mod series;
pub mod suite;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::{Ring, Scalar};
pub use series::{FormalDiffeo, Mono, Series};
