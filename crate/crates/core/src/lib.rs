//! Affine random walks `X_{t+1} = A X_t + B_t mod n` on `(Z/nZ)^d`.

pub mod error;
pub mod fourier;
pub mod hyperbolic;
pub mod io;
pub mod lattice;
pub mod measure;
pub mod mixing;
pub mod numeric;
pub mod pipeline;
pub mod svg;
pub mod symbolic;
mod parallel;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::IntMatrix;
pub use measure::IncrementMeasure;
