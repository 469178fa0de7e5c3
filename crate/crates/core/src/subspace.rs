//! Linear subspaces stored by orthonormal basis, and the distances FMS needs.
//!
//! A subspace is never materialized as a `D x D` projector: projections and
//! distances cost `O(Dd)` per point.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{FmsError, Result};
use crate::linalg::orthonormalize;
use crate::rng::{gaussian_matrix, rng_from_seed};

/// Tolerance on `B^T B = I` accepted by [`Subspace::from_orthonormal`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Two subspaces closer than this in [`dist_grassmann`] are considered equal.
pub const SUBSPACE_EQ_TOL: f64 = 1e-9;

/// A `d`-dimensional linear subspace of `R^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal (checked).
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let (ambient, dim) = basis.shape();
        if dim == 0 || dim > ambient {
            return Err(FmsError::dim(format!(
                "subspace basis must be D x d with 1 <= d <= D, got {ambient}x{dim}"
            )));
        }
        let err = (basis.tr_mul(&basis) - DMatrix::identity(dim, dim)).amax();
        if !(err <= ORTHONORMALITY_TOL) {
            return Err(FmsError::Data(format!(
                "basis is not orthonormal: max |B^T B - I| = {err:e}"
            )));
        }
        Ok(Subspace { basis })
    }

    /// The span of the columns of `m`, which must have full column rank.
    pub fn from_spanning(m: &DMatrix<f64>) -> Result<Self> {
        Ok(Subspace {
            basis: orthonormalize(m)?,
        })
    }

    pub(crate) fn from_basis_unchecked(basis: DMatrix<f64>) -> Self {
        debug_assert!(
            (basis.tr_mul(&basis) - DMatrix::identity(basis.ncols(), basis.ncols())).amax()
                < ORTHONORMALITY_TOL
        );
        Subspace { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(FmsError::dim(format!(
                "point has length {}, subspace lives in R^{}",
                x.len(),
                self.ambient_dim()
            )));
        }
        Ok(())
    }

    /// Orthogonal projection `P_L x`.
    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let x = DVector::from_column_slice(x);
        Ok(&self.basis * self.basis.tr_mul(&x))
    }

    /// Euclidean distance `|x - P_L x|`.
    pub fn dist_point(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let x = DVector::from_column_slice(x);
        let coeffs = self.basis.tr_mul(&x);
        Ok((x - &self.basis * coeffs).norm())
    }

    /// Distances of every column of `x` to the subspace.
    ///
    /// Residuals are formed explicitly instead of via `|x|^2 - |B^T x|^2`,
    /// which loses all precision for points close to the subspace.
    pub fn distances(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.nrows() != self.ambient_dim() {
            return Err(FmsError::dim(format!(
                "data has {} rows, subspace lives in R^{}",
                x.nrows(),
                self.ambient_dim()
            )));
        }
        let coeffs = self.basis.tr_mul(x);
        let mut resid = x.clone();
        resid.gemm(-1.0, &self.basis, &coeffs, 1.0);
        Ok(resid.column_iter().map(|c| c.norm()).collect())
    }

    /// The image `Q L` under an orthogonal `D x D` matrix `Q`.
    pub fn transformed(&self, q: &DMatrix<f64>) -> Result<Subspace> {
        if q.nrows() != self.ambient_dim() || q.ncols() != self.ambient_dim() {
            return Err(FmsError::dim("transform must be D x D"));
        }
        Subspace::from_orthonormal(q * &self.basis)
    }
}

fn singular_values(m: DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = SVD::new(m, false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Principal angles between two subspaces of equal dimension, ascending.
///
/// Cosines are the singular values of `B1^T B2`; sines are the singular
/// values of `(I - P1) B2`. Both are clamped to `[0, 1]` and combined with
/// `atan2`, which keeps small angles accurate where `acos` alone would
/// bottom out near `1e-8`.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() || a.dim() != b.dim() {
        return Err(FmsError::dim(format!(
            "cannot compare a {}-subspace of R^{} with a {}-subspace of R^{}",
            a.dim(),
            a.ambient_dim(),
            b.dim(),
            b.ambient_dim()
        )));
    }
    let cross = a.basis.tr_mul(&b.basis);
    let mut resid = b.basis.clone();
    resid.gemm(-1.0, &a.basis, &cross, 1.0);

    let cosines = singular_values(cross);
    let mut sines = singular_values(resid);
    sines.reverse();
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| s.clamp(0.0, 1.0).atan2(c.clamp(0.0, 1.0)))
        .collect())
}

/// Square root of the sum of squared principal angles.
pub fn dist_grassmann(a: &Subspace, b: &Subspace) -> Result<f64> {
    Ok(principal_angles(a, b)?
        .iter()
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt())
}

/// Equality as subspaces: `dist_grassmann < 1e-9`.
pub fn same_subspace(a: &Subspace, b: &Subspace) -> Result<bool> {
    Ok(dist_grassmann(a, b)? < SUBSPACE_EQ_TOL)
}

/// Haar-distributed random `d`-subspace of `R^D`.
pub fn random_subspace(ambient_dim: usize, dim: usize, seed: u64) -> Result<Subspace> {
    if dim == 0 || dim > ambient_dim {
        return Err(FmsError::dim(format!(
            "random subspace needs 1 <= d <= D, got d = {dim}, D = {ambient_dim}"
        )));
    }
    let g = gaussian_matrix(ambient_dim, dim, &mut rng_from_seed(seed));
    // QR with a nonnegative R diagonal maps Gaussian matrices to Haar bases.
    Subspace::from_spanning(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn line(x: f64, y: f64) -> Subspace {
        Subspace::from_spanning(&DMatrix::from_column_slice(2, 1, &[x, y])).unwrap()
    }

    #[test]
    fn atan2_angles_match_the_acos_route() {
        // Independent route: clamp-then-acos of the cosines alone, which is
        // accurate away from zero angle.
        for seed in 0..20 {
            let a = random_subspace(12, 3, seed).unwrap();
            let b = random_subspace(12, 3, seed + 100).unwrap();
            let mut via_acos: Vec<f64> = a
                .basis()
                .tr_mul(b.basis())
                .singular_values()
                .iter()
                .map(|c| c.clamp(0.0, 1.0).acos())
                .collect();
            via_acos.sort_by(f64::total_cmp);
            let angles = principal_angles(&a, &b).unwrap();
            for (x, y) in angles.iter().zip(&via_acos) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn project_onto_axis() {
        let l = line(1.0, 0.0);
        assert_abs_diff_eq!(
            l.project(&[3.0, 4.0]).unwrap(),
            DVector::from_vec(vec![3.0, 0.0])
        );
        assert_abs_diff_eq!(l.dist_point(&[3.0, 4.0]).unwrap(), 4.0);
        assert_eq!(l.dist_point(&[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            l.project(&[2.5, 0.0]).unwrap(),
            DVector::from_vec(vec![2.5, 0.0])
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let l = line(1.0, 0.0);
        assert!(matches!(
            l.project(&[1.0, 2.0, 3.0]),
            Err(FmsError::Dimension(_))
        ));
        assert!(matches!(l.dist_point(&[1.0]), Err(FmsError::Dimension(_))));
        let m = random_subspace(3, 1, 0).unwrap();
        assert!(matches!(
            dist_grassmann(&l, &m),
            Err(FmsError::Dimension(_))
        ));
    }

    #[test]
    fn residual_is_orthogonal_and_pythagorean() {
        let l = random_subspace(30, 4, 5).unwrap();
        let mut rng = rng_from_seed(6);
        for _ in 0..20 {
            let x = gaussian_matrix(30, 1, &mut rng);
            let x = x.as_slice();
            let px = l.project(x).unwrap();
            let resid = DVector::from_column_slice(x) - &px;
            assert!(resid.dot(&px).abs() < 1e-10);
            let dist = l.dist_point(x).unwrap();
            let total: f64 = x.iter().map(|v| v * v).sum();
            assert!((dist * dist + px.norm_squared() - total).abs() < 1e-10);
            let again = l.project(px.as_slice()).unwrap();
            assert!((again - &px).amax() < 1e-12);
        }
    }

    #[test]
    fn batch_distances_match_pointwise() {
        let l = random_subspace(12, 3, 1).unwrap();
        let x = gaussian_matrix(12, 9, &mut rng_from_seed(2));
        let batch = l.distances(&x).unwrap();
        for (i, d) in batch.iter().enumerate() {
            let single = l.dist_point(x.column(i).as_slice()).unwrap();
            assert_abs_diff_eq!(*d, single, epsilon = 1e-14);
        }
    }

    #[test]
    fn grassmann_closed_forms() {
        let x = line(1.0, 0.0);
        assert_eq!(dist_grassmann(&x, &x).unwrap(), 0.0);
        assert_abs_diff_eq!(
            dist_grassmann(&x, &line(0.0, 1.0)).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            dist_grassmann(&x, &line(1.0, 1.0)).unwrap(),
            FRAC_PI_4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn grassmann_resolves_tiny_angles() {
        let t: f64 = 1e-11;
        let a = line(1.0, 0.0);
        let b = line(t.cos(), t.sin());
        let d = dist_grassmann(&a, &b).unwrap();
        assert!((d - t).abs() < 1e-20, "got {d:e}");
    }

    #[test]
    fn full_space_has_zero_distance() {
        let a = random_subspace(6, 6, 1).unwrap();
        let b = random_subspace(6, 6, 2).unwrap();
        assert!(dist_grassmann(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn random_subspace_is_seeded() {
        let a = random_subspace(100, 5, 42).unwrap();
        let b = random_subspace(100, 5, 42).unwrap();
        assert_eq!(a, b);
        for seed in 0..100u64 {
            let c = random_subspace(100, 5, seed + 1000).unwrap();
            assert!(dist_grassmann(&a, &c).unwrap() > 0.0);
        }
        assert!(random_subspace(3, 4, 0).is_err());
        assert!(random_subspace(3, 0, 0).is_err());
    }

    #[test]
    fn rejects_non_orthonormal_basis() {
        let m = DMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        assert!(matches!(
            Subspace::from_orthonormal(m),
            Err(FmsError::Data(_))
        ));
    }
}
