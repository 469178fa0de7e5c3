//! Fast Median Subspace (FMS): robust recovery of a low-dimensional linear
//! subspace from data contaminated by outliers.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: QR orthonormalization, a Jacobi symmetric eigensolver, exact
//!   and randomized thin SVDs.
//! - [`subspace`]: orthonormal-basis subspaces, projections, point distances
//!   and the principal-angle distance between subspaces.
//! - [`preprocess`]: geometric-median centering and spherization.
//! - [`energy`]: the robust energy, its majorizing surrogate and the
//!   per-point scaling used by each iteration.
//! - [`fit`]: the FMS iteration itself and the plain PCA baseline.
//! - [`bench`]: needle-haystack data and the synthetic experiment sweeps.
//!
//! Data matrices are column-major with one point per column (`D x N`).

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod energy;
mod error;
pub mod fit;
pub mod linalg;
pub mod preprocess;
pub mod rng;
pub mod subspace;

pub use error::{FmsError, Result};
pub use fit::{
    fms_fit, fms_fit_observed, fms_fit_preprocessed, pca_fit, FmsConfig, FmsResult, FmsTrace, Init,
    SvdMode, TerminalStatus,
};
pub use linalg::{DataMatrix, ThinSvd};
pub use subspace::{dist_grassmann, Subspace};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
