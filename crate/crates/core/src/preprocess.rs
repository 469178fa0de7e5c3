//! Robust centering at the geometric median, and spherization.

use nalgebra::{DMatrix, DVector};

use crate::error::{FmsError, Result};
use crate::linalg::DataMatrix;

/// Weiszfeld stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeiszfeldOptions {
    /// Step tolerance, relative to the mean distance of the points from the
    /// starting center.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for WeiszfeldOptions {
    fn default() -> Self {
        WeiszfeldOptions {
            tol: 1e-10,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMedian {
    pub center: DVector<f64>,
    pub iterations: usize,
    /// False when `max_iters` was exhausted before the step tolerance was met.
    pub converged: bool,
}

/// Outcome of [`center_and_spherize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    pub center: DVector<f64>,
    pub spherized: bool,
    /// Zero-based column indices (into the input) removed because they were
    /// exactly zero after centering.
    pub dropped_points: Vec<usize>,
    pub weiszfeld_iters: usize,
}

fn coordinate_median(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.ncols();
    DVector::from_iterator(
        x.nrows(),
        x.row_iter().map(|row| {
            let mut v: Vec<f64> = row.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        }),
    )
}

fn sum_of_distances(x: &DMatrix<f64>, m: &DVector<f64>) -> f64 {
    x.column_iter().map(|c| (c - m).norm()).sum()
}

/// Geometric median `argmin_m sum_i |x_i - m|` by Weiszfeld's iteration,
/// started from the coordinate-wise median.
///
/// When an iterate coincides with a data point the subgradient optimality
/// condition is checked there: if it holds the point is returned exactly,
/// otherwise the iterate is nudged by `1e-12` times the data scale along the
/// descent direction and the iteration continues.
pub fn geometric_median(x: &DataMatrix, options: WeiszfeldOptions) -> Result<GeometricMedian> {
    if !(options.tol > 0.0) {
        return Err(FmsError::param(format!(
            "Weiszfeld tolerance must be positive, got {}",
            options.tol
        )));
    }
    let x = x.as_matrix();
    let first = x.column(0);
    if x.column_iter().all(|c| c == first) {
        return Ok(GeometricMedian {
            center: first.into_owned(),
            iterations: 0,
            converged: true,
        });
    }

    let mut m = coordinate_median(x);
    let spread = sum_of_distances(x, &m) / x.ncols() as f64;
    let step_tol = options.tol * spread;
    let snap_tol = 1e-14 * spread;
    let mut objective = if cfg!(debug_assertions) {
        sum_of_distances(x, &m)
    } else {
        0.0
    };

    for iter in 1..=options.max_iters {
        let dists: Vec<f64> = x.column_iter().map(|c| (c - &m).norm()).collect();

        if let Some(j) = dists.iter().position(|&d| d <= snap_tol) {
            let anchor = x.column(j).into_owned();
            let mut pull = DVector::<f64>::zeros(x.nrows());
            let mut multiplicity = 0usize;
            for c in x.column_iter() {
                let diff = c - &anchor;
                let norm = diff.norm();
                if norm <= snap_tol {
                    multiplicity += 1;
                } else {
                    pull += diff / norm;
                }
            }
            let pull_norm = pull.norm();
            if pull_norm <= multiplicity as f64 {
                return Ok(GeometricMedian {
                    center: anchor,
                    iterations: iter,
                    converged: true,
                });
            }
            m = anchor + pull * (1e-12 * spread / pull_norm);
            continue;
        }

        let mut numer = DVector::<f64>::zeros(x.nrows());
        let mut denom = 0.0;
        for (c, &d) in x.column_iter().zip(&dists) {
            numer.axpy(1.0 / d, &c, 1.0);
            denom += 1.0 / d;
        }
        let next = numer / denom;
        let step = (&next - &m).norm();
        m = next;

        if cfg!(debug_assertions) {
            let updated = sum_of_distances(x, &m);
            debug_assert!(
                updated <= objective * (1.0 + 1e-12) + 1e-12 * spread,
                "Weiszfeld objective increased: {objective} -> {updated}"
            );
            objective = updated;
        }

        if step <= step_tol {
            return Ok(GeometricMedian {
                center: m,
                iterations: iter,
                converged: true,
            });
        }
    }

    Ok(GeometricMedian {
        center: m,
        iterations: options.max_iters,
        converged: false,
    })
}

/// Divides every column by its Euclidean norm. Zero columns are dropped and
/// their indices returned.
pub fn spherize(x: &DataMatrix) -> Result<(DataMatrix, Vec<usize>)> {
    let mut kept = Vec::with_capacity(x.num_points());
    let mut dropped = Vec::new();
    for (i, c) in x.as_matrix().column_iter().enumerate() {
        let norm = c.norm();
        if norm == 0.0 {
            dropped.push(i);
        } else {
            kept.push(c / norm);
        }
    }
    if kept.is_empty() {
        return Err(FmsError::Data(
            "every point is zero; nothing to spherize".into(),
        ));
    }
    Ok((DataMatrix::new(DMatrix::from_columns(&kept))?, dropped))
}

/// Centers the data at its geometric median, drops points that become
/// exactly zero, and optionally scales every remaining point to unit norm.
///
/// Fails only when every point coincides with the median.
pub fn center_and_spherize(
    x: &DataMatrix,
    spherize: bool,
) -> Result<(DataMatrix, PreprocessReport)> {
    center_and_spherize_with(x, spherize, WeiszfeldOptions::default())
}

pub fn center_and_spherize_with(
    x: &DataMatrix,
    spherize: bool,
    options: WeiszfeldOptions,
) -> Result<(DataMatrix, PreprocessReport)> {
    let median = geometric_median(x, options)?;
    let mut kept = Vec::with_capacity(x.num_points());
    let mut dropped = Vec::new();
    for (i, c) in x.as_matrix().column_iter().enumerate() {
        let centered = c - &median.center;
        let norm = centered.norm();
        if norm == 0.0 {
            dropped.push(i);
        } else if spherize {
            kept.push(centered / norm);
        } else {
            kept.push(centered);
        }
    }
    if kept.is_empty() {
        return Err(FmsError::Data(
            "every point coincides with the geometric median".into(),
        ));
    }
    let report = PreprocessReport {
        center: median.center,
        spherized: spherize,
        dropped_points: dropped,
        weiszfeld_iters: median.iterations,
    };
    Ok((DataMatrix::new(DMatrix::from_columns(&kept))?, report))
}
