//! Needle-haystack data and the synthetic experiment sweeps.
//!
//! Inliers are `B g / sqrt(d)` with `B` a Haar-random orthonormal `D x d`
//! basis and `g ~ N(0, I_d)`; outliers are `h sqrt(lambda / D)` with
//! `h ~ N(0, I_D)`. Both have unit expected squared norm when `lambda = 1`.
//! Every coordinate of every point then receives `N(0, noise_var)` noise.
//!
//! Each trial draws its own seed from `(master seed, grid index, trial
//! index)`, so sweeps give identical records whether trials run in parallel
//! or sequentially.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{FmsError, Result};
use crate::fit::{fms_fit_observed, pca_fit, FmsConfig, Init, SvdMode};
use crate::linalg::DataMatrix;
use crate::rng::{derive_seed, rng_from_seed};
use crate::subspace::{dist_grassmann, random_subspace, Subspace};

/// Parameters of one needle-haystack data set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaystackSpec {
    pub ambient_dim: usize,
    pub dim: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// Outlier variance scale.
    pub lambda: f64,
    /// Per-coordinate noise variance.
    pub noise_var: f64,
    pub seed: u64,
}

impl HaystackSpec {
    pub fn new(ambient_dim: usize, dim: usize, n_in: usize, n_out: usize) -> Self {
        HaystackSpec {
            ambient_dim,
            dim,
            n_in,
            n_out,
            lambda: 1.0,
            noise_var: 1e-6,
            seed: 0,
        }
    }

    pub fn num_points(&self) -> usize {
        self.n_in + self.n_out
    }

    pub fn outlier_fraction(&self) -> f64 {
        self.n_out as f64 / self.num_points() as f64
    }

    /// `(D - d) / D`.
    pub fn fraction_bound(&self) -> f64 {
        fraction_bound(self.ambient_dim, self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > self.ambient_dim {
            return Err(FmsError::dim(format!(
                "haystack needs 1 <= d <= D, got d = {}, D = {}",
                self.dim, self.ambient_dim
            )));
        }
        if self.num_points() == 0 {
            return Err(FmsError::param("haystack needs at least one point"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(FmsError::param(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(FmsError::param(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }

    /// Errors unless the outlier fraction is strictly below `(D - d) / D`.
    pub fn check_fraction_bound(&self) -> Result<()> {
        check_fraction(self.outlier_fraction(), self.ambient_dim, self.dim)
    }
}

pub fn fraction_bound(ambient_dim: usize, dim: usize) -> f64 {
    (ambient_dim - dim) as f64 / ambient_dim as f64
}

fn check_fraction(fraction: f64, ambient_dim: usize, dim: usize) -> Result<()> {
    let bound = fraction_bound(ambient_dim, dim);
    if !(fraction >= 0.0 && fraction < bound) {
        return Err(FmsError::BoundViolation {
            fraction,
            bound,
            ambient: ambient_dim,
            dim,
        });
    }
    Ok(())
}

/// A generated data set with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Haystack {
    pub data: DataMatrix,
    pub truth: Subspace,
    /// `true` for columns drawn as outliers.
    pub is_outlier: Vec<bool>,
}

pub fn generate_haystack(spec: &HaystackSpec) -> Result<Haystack> {
    spec.validate()?;
    let (dd, d, n) = (spec.ambient_dim, spec.dim, spec.num_points());
    let truth = random_subspace(dd, d, derive_seed(spec.seed, &[0]))?;
    let mut rng = rng_from_seed(derive_seed(spec.seed, &[1]));

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let inlier_scale = 1.0 / (d as f64).sqrt();
    let outlier_scale = (spec.lambda / dd as f64).sqrt();
    let noise_sd = spec.noise_var.sqrt();
    let mut data = DMatrix::<f64>::zeros(dd, n);
    let mut is_outlier = vec![false; n];

    for (j, &col) in order.iter().enumerate() {
        let mut column = data.column_mut(col);
        if j < spec.n_in {
            let g = DMatrix::from_fn(d, 1, |_, _| {
                rng.sample::<f64, _>(StandardNormal) * inlier_scale
            });
            column.gemv(1.0, truth.basis(), &g.column(0), 0.0);
        } else {
            is_outlier[col] = true;
            for v in column.iter_mut() {
                *v = rng.sample::<f64, _>(StandardNormal) * outlier_scale;
            }
        }
        if noise_sd > 0.0 {
            for v in column.iter_mut() {
                *v += rng.sample::<f64, _>(StandardNormal) * noise_sd;
            }
        }
    }

    Ok(Haystack {
        data: DataMatrix::new(data)?,
        truth,
        is_outlier,
    })
}

/// A method compared in the sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// FMS with the given robustness power.
    Fms { power: f64 },
    /// Plain (uncentered) PCA.
    Pca,
}

impl Algorithm {
    /// Identifier used in CSV output, e.g. `FMS_1`, `FMS_0.1`, `PCA`.
    pub fn id(&self) -> String {
        match self {
            Algorithm::Fms { power } => format!("FMS_{power}"),
            Algorithm::Pca => "PCA".to_string(),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = FmsError;

    /// Accepts `pca`, `fms` (p = 1), `fms1`, `fms0.1`, `FMS_0.5`, ...
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "pca" {
            return Ok(Algorithm::Pca);
        }
        let rest = lower
            .strip_prefix("fms")
            .ok_or_else(|| FmsError::param(format!("unknown algorithm '{s}'")))?;
        let rest = rest.trim_start_matches(['_', ':', '=']);
        let power = if rest.is_empty() {
            1.0
        } else {
            rest.parse::<f64>()
                .map_err(|_| FmsError::param(format!("bad FMS power in '{s}'")))?
        };
        crate::energy::check_power(power)?;
        Ok(Algorithm::Fms { power })
    }
}

/// Whether independent trials may run on the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Settings shared by every sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    pub max_iters: usize,
    pub step_tol: f64,
    pub init: Init,
    pub svd: SvdMode,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            trials: 20,
            algorithms: vec![Algorithm::Fms { power: 1.0 }, Algorithm::Pca],
            epsilon: 1e-10,
            max_iters: FmsConfig::DEFAULT_MAX_ITERS,
            step_tol: FmsConfig::DEFAULT_STEP_TOL,
            init: Init::Random,
            svd: SvdMode::randomized(),
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl SweepSettings {
    fn fms_config(&self, dim: usize, power: f64, seed: u64) -> FmsConfig {
        FmsConfig {
            dim,
            power,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            step_tol: self.step_tol,
            init: self.init,
            svd: self.svd,
            seed,
        }
    }
}

/// One algorithm run on one generated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub sweep_id: String,
    pub algorithm: String,
    pub ambient_dim: usize,
    pub dim: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub fraction: f64,
    pub lambda: f64,
    pub noise_var: f64,
    pub seed: u64,
    /// `dist_grassmann(found, truth)`.
    pub error: f64,
    /// Algorithm wall time only; data generation is excluded.
    pub runtime_s: f64,
    pub iterations: usize,
    /// `converged`, `max_iters`, or `direct` for PCA.
    pub status: String,
}

pub const TRIAL_CSV_HEADER: &str =
    "sweep_id,algorithm,D,d,n_in,n_out,fraction,lambda,noise_var,seed,error,runtime_s,iterations,status";

/// Floats in all CSV output: 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sweep_id,
            self.algorithm,
            self.ambient_dim,
            self.dim,
            self.n_in,
            self.n_out,
            format_float(self.fraction),
            format_float(self.lambda),
            format_float(self.noise_var),
            self.seed,
            format_float(self.error),
            format_float(self.runtime_s),
            self.iterations,
            self.status
        );
        row
    }
}

pub fn write_trial_csv<W: Write>(records: &[TrialRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRIAL_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Runs every algorithm on one data set.
pub fn run_trial(
    sweep_id: &str,
    spec: &HaystackSpec,
    settings: &SweepSettings,
) -> Result<Vec<TrialRecord>> {
    let hay = generate_haystack(spec)?;
    let fit_seed = derive_seed(spec.seed, &[2]);
    settings
        .algorithms
        .iter()
        .map(|alg| {
            let (found, runtime_s, iterations, status) = match *alg {
                Algorithm::Fms { power } => {
                    let cfg = settings.fms_config(spec.dim, power, fit_seed);
                    let start = Instant::now();
                    let res = fms_fit_observed(&hay.data, &cfg, |_, _| {})?;
                    let runtime = start.elapsed().as_secs_f64();
                    let iters = res.trace.iterations();
                    let status = res.trace.status.as_str().to_string();
                    (res.subspace, runtime, iters, status)
                }
                Algorithm::Pca => {
                    let start = Instant::now();
                    let l = pca_fit(&hay.data, spec.dim, settings.svd, fit_seed)?;
                    (l, start.elapsed().as_secs_f64(), 1, "direct".to_string())
                }
            };
            Ok(TrialRecord {
                sweep_id: sweep_id.to_string(),
                algorithm: alg.id(),
                ambient_dim: spec.ambient_dim,
                dim: spec.dim,
                n_in: spec.n_in,
                n_out: spec.n_out,
                fraction: spec.outlier_fraction(),
                lambda: spec.lambda,
                noise_var: spec.noise_var,
                seed: spec.seed,
                error: dist_grassmann(&found, &hay.truth)?,
                runtime_s,
                iterations,
                status,
            })
        })
        .collect()
}

fn trial_seed(master: u64, grid_index: usize, trial: usize) -> u64 {
    derive_seed(master, &[grid_index as u64, trial as u64])
}

/// Runs `settings.trials` trials for every grid point; records come out
/// ordered by grid point, then trial, then algorithm.
fn run_grid(
    sweep_id: &str,
    grid: &[HaystackSpec],
    settings: &SweepSettings,
) -> Result<Vec<TrialRecord>> {
    let jobs: Vec<HaystackSpec> = grid
        .iter()
        .enumerate()
        .flat_map(|(g, spec)| {
            (0..settings.trials).map(move |t| HaystackSpec {
                seed: trial_seed(settings.seed, g, t),
                ..*spec
            })
        })
        .collect();
    let batches: Vec<Result<Vec<TrialRecord>>> = match settings.execution {
        Execution::Sequential => jobs
            .iter()
            .map(|s| run_trial(sweep_id, s, settings))
            .collect(),
        Execution::Parallel => jobs
            .par_iter()
            .map(|s| run_trial(sweep_id, s, settings))
            .collect(),
    };
    let mut records = Vec::with_capacity(jobs.len() * settings.algorithms.len());
    for batch in batches {
        records.extend(batch?);
    }
    Ok(records)
}

/// Error versus outlier fraction at a fixed total `n_in + n_out` from `base`.
pub fn sweep_outlier_fraction(
    base: &HaystackSpec,
    fractions: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<TrialRecord>> {
    base.validate()?;
    let total = base.num_points();
    let grid = fractions
        .iter()
        .map(|&f| {
            check_fraction(f, base.ambient_dim, base.dim)?;
            let n_out = (f * total as f64).round() as usize;
            Ok(HaystackSpec {
                n_in: total - n_out,
                n_out,
                ..*base
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run_grid("fraction", &grid, settings)
}

/// Runtime and error versus ambient dimension.
pub fn sweep_ambient_dim(
    base: &HaystackSpec,
    dims: &[usize],
    settings: &SweepSettings,
) -> Result<Vec<TrialRecord>> {
    let grid = dims
        .iter()
        .map(|&dd| {
            if dd < base.dim + 1 {
                return Err(FmsError::dim(format!(
                    "ambient dimension {dd} must exceed the subspace dimension {}",
                    base.dim
                )));
            }
            let spec = HaystackSpec {
                ambient_dim: dd,
                ..*base
            };
            spec.validate()?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>>>()?;
    run_grid("dimension", &grid, settings)
}

/// Error versus the outlier variance scale `lambda`.
pub fn sweep_variance_ratio(
    base: &HaystackSpec,
    lambdas: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<TrialRecord>> {
    let grid = lambdas
        .iter()
        .map(|&lambda| {
            let spec = HaystackSpec { lambda, ..*base };
            spec.validate()?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>>>()?;
    run_grid("variance", &grid, settings)
}

/// Setup of the per-iteration convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub ambient_dim: usize,
    pub dim: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub noise_levels: Vec<f64>,
    pub inits: Vec<Init>,
    pub iterations: usize,
    pub trials: usize,
    pub power: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            ambient_dim: 500,
            dim: 5,
            n_in: 500,
            n_out: 500,
            noise_levels: vec![0.0, 1e-6],
            inits: vec![Init::Random, Init::PcaWarmStart],
            iterations: 15,
            trials: 1,
            power: 1.0,
        }
    }
}

/// One iterate of one convergence run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub noise_var: f64,
    pub init: Init,
    pub trial: usize,
    pub seed: u64,
    /// Iteration index; `k = 0` is the starting subspace.
    pub k: usize,
    pub error: f64,
    pub elapsed_s: f64,
    pub energy: f64,
}

pub const CONVERGENCE_CSV_HEADER: &str = "noise_var,init,trial,seed,k,error,elapsed_s,energy";

pub fn init_name(init: Init) -> &'static str {
    match init {
        Init::Random => "random",
        Init::PcaWarmStart => "pca",
    }
}

impl ConvergenceRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            format_float(self.noise_var),
            init_name(self.init),
            self.trial,
            self.seed,
            self.k,
            format_float(self.error),
            format_float(self.elapsed_s),
            format_float(self.energy)
        )
    }
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CONVERGENCE_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Per-iteration error to the truth, cumulative time and energy for FMS
/// under each starting strategy. Both strategies see the same data.
pub fn convergence_trace_experiment(
    spec: &ConvergenceSpec,
    settings: &SweepSettings,
) -> Result<Vec<ConvergenceRow>> {
    let jobs: Vec<(usize, usize, f64)> = spec
        .noise_levels
        .iter()
        .enumerate()
        .flat_map(|(g, &noise)| (0..spec.trials).map(move |t| (g, t, noise)))
        .collect();

    let run = |&(g, t, noise_var): &(usize, usize, f64)| -> Result<Vec<ConvergenceRow>> {
        let seed = trial_seed(settings.seed, g, t);
        let hay = generate_haystack(&HaystackSpec {
            ambient_dim: spec.ambient_dim,
            dim: spec.dim,
            n_in: spec.n_in,
            n_out: spec.n_out,
            lambda: 1.0,
            noise_var,
            seed,
        })?;
        let mut rows = Vec::new();
        for &init in &spec.inits {
            let cfg = FmsConfig {
                max_iters: spec.iterations,
                init,
                ..settings.fms_config(spec.dim, spec.power, derive_seed(seed, &[2]))
            };
            let mut errors = Vec::with_capacity(spec.iterations + 1);
            let res = fms_fit_observed(&hay.data, &cfg, |_, l| {
                errors.push(dist_grassmann(l, &hay.truth).unwrap_or(f64::NAN));
            })?;
            let energies = res.trace.energies();
            let times = std::iter::once(0.0).chain(res.trace.records.iter().map(|r| r.elapsed_s));
            for (k, ((error, energy), elapsed_s)) in
                errors.iter().zip(&energies).zip(times).enumerate()
            {
                rows.push(ConvergenceRow {
                    noise_var,
                    init,
                    trial: t,
                    seed,
                    k,
                    error: *error,
                    elapsed_s,
                    energy: *energy,
                });
            }
        }
        Ok(rows)
    };

    let batches: Vec<Result<Vec<ConvergenceRow>>> = match settings.execution {
        Execution::Sequential => jobs.iter().map(run).collect(),
        Execution::Parallel => jobs.par_iter().map(run).collect(),
    };
    let mut rows = Vec::new();
    for b in batches {
        rows.extend(b?);
    }
    Ok(rows)
}
