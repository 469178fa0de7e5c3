//! The robust energy `F`, its majorizing surrogate `H`, and the point
//! scaling that turns minimization of `H` into plain PCA.
//!
//! With robustness power `p` and regularization `delta`, a point at distance
//! `r` from the subspace contributes
//!
//! ```text
//! r^p                                                 if r^(2-p) >= p*delta
//! r^2 / (2 delta) + (p delta)^(p/(2-p)) - (p delta)^(2/(2-p)) / (2 delta)   otherwise
//! ```
//!
//! The two branches meet continuously at `r^(2-p) = p*delta`. The iteration
//! is parameterized by `epsilon = sqrt(p * delta)`; see [`delta_from_epsilon`].

use nalgebra::DMatrix;

use crate::error::{FmsError, Result};
use crate::linalg::DataMatrix;
use crate::subspace::Subspace;

/// `delta = epsilon^2 / p`, the regularization at which the traced energy
/// is evaluated.
pub fn delta_from_epsilon(epsilon: f64, p: f64) -> f64 {
    epsilon * epsilon / p
}

pub(crate) fn check_power(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 2.0) {
        return Err(FmsError::param(format!(
            "robustness power p must lie in (0, 2), got {p}"
        )));
    }
    Ok(())
}

fn check_params(p: f64, delta: f64) -> Result<()> {
    check_power(p)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(FmsError::param(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(())
}

/// Value of the quadratic branch at distance `r`.
pub fn regularized_term(r: f64, p: f64, delta: f64) -> f64 {
    let pd = p * delta;
    r * r / (2.0 * delta) + pd.powf(p / (2.0 - p)) - pd.powf(2.0 / (2.0 - p)) / (2.0 * delta)
}

/// Contribution of one point at distance `r`.
pub fn point_energy(r: f64, p: f64, delta: f64) -> f64 {
    if r.powf(2.0 - p) >= p * delta {
        r.powf(p)
    } else {
        regularized_term(r, p, delta)
    }
}

/// Contribution of one point to `H(L, L0)` given `r = dist(x, L)` and
/// `r0 = dist(x, L0)`.
pub fn point_surrogate(r: f64, r0: f64, p: f64, delta: f64) -> f64 {
    let w = r0.powf(2.0 - p);
    if w >= p * delta {
        0.5 * p * r * r / w + (1.0 - 0.5 * p) * r0.powf(p)
    } else {
        regularized_term(r, p, delta)
    }
}

pub(crate) fn energy_from_distances(dists: &[f64], p: f64, delta: f64) -> f64 {
    dists.iter().map(|&r| point_energy(r, p, delta)).sum()
}

pub(crate) fn surrogate_from_distances(dists: &[f64], dists0: &[f64], p: f64, delta: f64) -> f64 {
    dists
        .iter()
        .zip(dists0)
        .map(|(&r, &r0)| point_surrogate(r, r0, p, delta))
        .sum()
}

/// The robust energy `F(L)`.
pub fn energy(x: &DataMatrix, l: &Subspace, p: f64, delta: f64) -> Result<f64> {
    check_params(p, delta)?;
    let dists = l.distances(x.as_matrix())?;
    Ok(energy_from_distances(&dists, p, delta))
}

/// The majorizing surrogate `H(L, L0)`: `H >= F` everywhere and
/// `H(L0, L0) = F(L0)`.
pub fn surrogate(x: &DataMatrix, l: &Subspace, l0: &Subspace, p: f64, delta: f64) -> Result<f64> {
    check_params(p, delta)?;
    if l.ambient_dim() != l0.ambient_dim() || l.dim() != l0.dim() {
        return Err(FmsError::dim(
            "surrogate needs subspaces of equal dimensions",
        ));
    }
    let dists = l.distances(x.as_matrix())?;
    let dists0 = l0.distances(x.as_matrix())?;
    Ok(surrogate_from_distances(&dists, &dists0, p, delta))
}

/// Per-point divisor `max(r^((2-p)/2), epsilon)`.
pub fn scale_factor(r: f64, p: f64, epsilon: f64) -> f64 {
    r.powf(0.5 * (2.0 - p)).max(epsilon)
}

pub(crate) fn scaled_from_distances(
    x: &DMatrix<f64>,
    dists: &[f64],
    p: f64,
    epsilon: f64,
) -> DMatrix<f64> {
    let mut y = x.clone();
    for (mut col, &r) in y.column_iter_mut().zip(dists) {
        col /= scale_factor(r, p, epsilon);
    }
    y
}

/// Column `i` of the result is `x_i / max(dist(x_i, L)^((2-p)/2), epsilon)`.
pub fn scale_columns(x: &DataMatrix, l: &Subspace, p: f64, epsilon: f64) -> Result<DataMatrix> {
    check_power(p)?;
    if !(epsilon > 0.0) {
        return Err(FmsError::param(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let dists = l.distances(x.as_matrix())?;
    DataMatrix::new(scaled_from_distances(x.as_matrix(), &dists, p, epsilon))
}
