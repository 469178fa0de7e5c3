//! Dense kernels: QR orthonormalization, a cyclic Jacobi symmetric
//! eigensolver, and exact and randomized thin SVDs.
//!
//! Everything here is a pure function of its inputs and runs sequentially,
//! so repeated calls with the same inputs (and seeds) are bitwise identical.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{FmsError, Result};
use crate::rng::{gaussian_matrix, rng_from_seed};

/// A `D x N` matrix of finite values whose columns are data points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(FmsError::dim(format!(
                "data matrix must be non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % matrix.nrows(), pos / matrix.nrows());
            return Err(FmsError::Data(format!(
                "non-finite entry at row {r}, column {c}"
            )));
        }
        Ok(DataMatrix(matrix))
    }

    /// Builds a data matrix from points given as equal-length slices.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
        if let Some(i) = points.iter().position(|p| p.as_ref().len() != dim) {
            return Err(FmsError::dim(format!(
                "point {i} has length {}, expected {dim}",
                points[i].as_ref().len()
            )));
        }
        let data: Vec<f64> = points
            .iter()
            .flat_map(|p| p.as_ref().iter().copied())
            .collect();
        Self::new(DMatrix::from_vec(dim, points.len(), data))
    }

    /// Ambient dimension `D`.
    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    /// Number of points `N`.
    pub fn num_points(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.0.nrows();
        &self.0.as_slice()[i * d..(i + 1) * d]
    }
}

/// Top-`k` singular triplets: `A ~ U diag(S) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// Options for [`randomized_thin_svd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomizedSvdOptions {
    pub oversampling: usize,
    pub power_iters: usize,
}

impl Default for RandomizedSvdOptions {
    fn default() -> Self {
        RandomizedSvdOptions {
            oversampling: 10,
            power_iters: 2,
        }
    }
}

/// Householder QR of a tall matrix. Returns the thin orthonormal factor and
/// the diagonal of `R`, with signs chosen so that `R[j][j] >= 0`.
///
/// Q is orthonormal even when `m` is rank deficient: a zero pivot column
/// simply skips its reflector.
fn householder_qr(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (rows, cols) = m.shape();
    debug_assert!(cols <= rows);
    let mut a = m.clone();
    let mut reflectors: Vec<Option<DVector<f64>>> = Vec::with_capacity(cols);
    let mut rdiag = Vec::with_capacity(cols);

    for j in 0..cols {
        let x = a.view((j, j), (rows - j, 1)).column(0).into_owned();
        let norm = x.norm();
        if norm == 0.0 {
            reflectors.push(None);
            rdiag.push(0.0);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            reflectors.push(None);
            rdiag.push(alpha);
            continue;
        }
        v /= vnorm;
        // A[j.., j..] -= 2 v (v^T A[j.., j..])
        let mut block = a.view_mut((j, j), (rows - j, cols - j));
        let w = block.tr_mul(&v);
        block.ger(-2.0, &v, &w, 1.0);
        reflectors.push(Some(v));
        rdiag.push(alpha);
    }

    let mut q = DMatrix::<f64>::identity(rows, cols);
    for (j, v) in reflectors.iter().enumerate().rev() {
        if let Some(v) = v {
            let mut block = q.view_mut((j, 0), (rows - j, cols));
            let w = block.tr_mul(v);
            block.ger(-2.0, v, &w, 1.0);
        }
    }
    for (j, r) in rdiag.iter_mut().enumerate() {
        if *r < 0.0 {
            *r = -*r;
            q.column_mut(j).neg_mut();
        }
    }
    (q, rdiag)
}

/// Orthonormal basis of the column space of `m` that never fails: rank
/// deficient inputs are completed with arbitrary orthonormal directions.
pub(crate) fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    householder_qr(m).0
}

/// Orthonormalizes the columns of a `D x k` matrix (`k <= D`).
///
/// The result spans the same space as `m`, with column `j` positively
/// correlated with the `j`-th Gram-Schmidt direction of `m`.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if cols == 0 || cols > rows {
        return Err(FmsError::dim(format!(
            "orthonormalize needs 1 <= k <= D, got a {rows}x{cols} matrix"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FmsError::Data(
            "non-finite entry in matrix to orthonormalize".into(),
        ));
    }
    let (q, rdiag) = householder_qr(m);
    let largest = rdiag.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()));
    let threshold = largest * f64::EPSILON * (rows.max(cols) as f64) * 16.0;
    let rank = rdiag.iter().filter(|r| r.abs() > threshold).count();
    if rank < cols || largest == 0.0 {
        return Err(FmsError::Degenerate {
            rank,
            required: cols,
        });
    }
    Ok(q)
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Eigenvalues in nonincreasing order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi eigensolver for small symmetric matrices.
pub fn small_symmetric_eigen(s: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(FmsError::dim(format!(
            "symmetric eigensolver needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(FmsError::Data(
            "non-finite entry in symmetric matrix".into(),
        ));
    }
    let scale = s.amax().max(1.0);
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .fold(0.0_f64, |acc, (i, j)| {
            acc.max((s[(i, j)] - s[(j, i)]).abs())
        });
    if asym > 1e-12 * scale {
        return Err(FmsError::Data(format!(
            "matrix is not symmetric: max |S_ij - S_ji| = {asym:e}"
        )));
    }
    Ok(jacobi_eigen(s))
}

fn jacobi_eigen(s: &DMatrix<f64>) -> SymmetricEigen {
    let n = s.nrows();
    let mut a = s.clone();
    // Work with the exactly symmetric part.
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let fro = a.norm();

    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * fro || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Negligible against both diagonal entries: zero it outright.
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs().min(aqq.abs())) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = v.select_columns(&order);
    for mut col in vectors.column_iter_mut() {
        if leading_sign_is_negative(col.as_slice()) {
            col.neg_mut();
        }
    }
    SymmetricEigen { values, vectors }
}

/// True when the first entry of significant magnitude is negative.
fn leading_sign_is_negative(x: &[f64]) -> bool {
    let largest = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if largest == 0.0 {
        return false;
    }
    x.iter()
        .find(|v| v.abs() > 1e-12 * largest)
        .is_some_and(|v| *v < 0.0)
}

/// Flips singular pairs so that each left vector's leading entry is >= 0.
fn apply_sign_convention(svd: &mut ThinSvd) {
    for j in 0..svd.s.len() {
        if leading_sign_is_negative(svd.u.column(j).as_slice()) {
            svd.u.column_mut(j).neg_mut();
            svd.v.column_mut(j).neg_mut();
        }
    }
}

fn check_rank_request(a: &DMatrix<f64>, k: usize) -> Result<()> {
    let (m, n) = a.shape();
    if k == 0 || k > m.min(n) {
        return Err(FmsError::dim(format!(
            "requested rank {k} must be in 1..=min(D, N) = {} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    Ok(())
}

/// Top-`k` singular triplets computed from a full dense SVD.
pub fn exact_thin_svd(a: &DMatrix<f64>, k: usize) -> Result<ThinSvd> {
    check_rank_request(a, k)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(FmsError::Data("non-finite entry in SVD input".into()));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| FmsError::Data("dense SVD failed to converge".into()))?;
    let u_full = svd.u.expect("requested U");
    let vt_full = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.truncate(k);

    let u = u_full.select_columns(&order);
    let v = vt_full.select_rows(&order).transpose();
    let s = DVector::from_iterator(k, order.iter().map(|&i| svd.singular_values[i].max(0.0)));
    let mut out = ThinSvd { u, s, v };
    apply_sign_convention(&mut out);
    Ok(out)
}

/// Randomized thin SVD: Gaussian range finder with power iterations, then
/// a small eigenproblem on the projected Gram matrix.
///
/// Requires `k + oversampling <= min(D, N)`.
pub fn randomized_thin_svd(
    a: &DMatrix<f64>,
    k: usize,
    options: RandomizedSvdOptions,
    seed: u64,
) -> Result<ThinSvd> {
    randomized_core(a, k, options, seed, None)
}

/// [`randomized_thin_svd`] with the range finder's initial block seeded by
/// the columns of `start` (`D x s`, `s <= k + oversampling`); the remaining
/// columns are Gaussian samples of the range as usual.
///
/// If `start` already spans the top-`k` left singular subspace, that
/// subspace is recovered exactly, whatever the spectral gap.
pub fn randomized_thin_svd_from(
    a: &DMatrix<f64>,
    k: usize,
    start: &DMatrix<f64>,
    options: RandomizedSvdOptions,
    seed: u64,
) -> Result<ThinSvd> {
    if start.nrows() != a.nrows() || start.ncols() > k + options.oversampling {
        return Err(FmsError::dim(format!(
            "start block is {}x{}, need {} rows and at most {} columns",
            start.nrows(),
            start.ncols(),
            a.nrows(),
            k + options.oversampling
        )));
    }
    randomized_core(a, k, options, seed, Some(start))
}

fn randomized_core(
    a: &DMatrix<f64>,
    k: usize,
    options: RandomizedSvdOptions,
    seed: u64,
    start: Option<&DMatrix<f64>>,
) -> Result<ThinSvd> {
    check_rank_request(a, k)?;
    let (m, n) = a.shape();
    let sketch = k + options.oversampling;
    if sketch > m.min(n) {
        return Err(FmsError::dim(format!(
            "rank {k} plus oversampling {} exceeds min(D, N) = {}",
            options.oversampling,
            m.min(n)
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(FmsError::Data("non-finite entry in SVD input".into()));
    }

    let mut rng = rng_from_seed(seed);
    let fixed = start.map_or(0, |s| s.ncols());
    let sampled = a * gaussian_matrix(n, sketch - fixed, &mut rng);
    let y = match start {
        Some(s) => {
            let mut y = DMatrix::zeros(m, sketch);
            y.columns_mut(0, fixed).copy_from(s);
            y.columns_mut(fixed, sketch - fixed).copy_from(&sampled);
            y
        }
        None => sampled,
    };
    let mut q = orthonormal_basis(&y);
    for _ in 0..options.power_iters {
        let z = orthonormal_basis(&a.tr_mul(&q));
        q = orthonormal_basis(&(a * z));
    }

    let b = q.tr_mul(a); // sketch x N
    let gram = &b * b.transpose();
    let eig = jacobi_eigen(&gram);
    let w = eig.vectors.columns(0, k).into_owned();
    let s = DVector::from_iterator(k, eig.values.iter().take(k).map(|l| l.max(0.0).sqrt()));
    let u = &q * &w;
    let v = orthonormal_basis(&b.tr_mul(&w));

    let mut out = ThinSvd { u, s, v };
    apply_sign_convention(&mut out);
    Ok(out)
}
