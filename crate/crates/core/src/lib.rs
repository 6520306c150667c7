//! Discrete tools for prescribing scalar and boundary mean curvature.
//!
//! * [`tensor_grid`]: curvature of metrics given by components on slab grids.
//! * [`linearized_ops`]: the linearized map `h ↦ (δR, 2δH)`, its adjoint and
//!   the identities tying them together.
//! * [`prescriber`]: Newton iteration on the Gram system and the full
//!   prescription pipeline.
//! * [`surface2d`]: conformal solvers on triangle meshes.
//! * [`conformal_spectra`]: conformal Laplacian energy and first eigenvalues.
//! * [`rearrange`]: boundary reparametrizations approximating one function by
//!   another composed with a diffeomorphism.
//! * [`warped`]: total scalar curvature of warped products.

pub mod error;
pub mod fixtures;
pub mod linearized_ops;
pub mod linalg;
pub mod prescriber;
pub mod rearrange;
pub mod scalar;
pub mod conformal_spectra;
pub mod surface2d;
pub mod tensor_grid;
pub mod warped;

pub use error::{Error, Result};
pub use tensor_grid::{BoundaryField, GridMetric, GridShape, ScalarField, SymTensorField};
