//! The Fast Median Subspace iteration and the plain PCA baseline.
//!
//! Each step rescales the *original* points by
//! `1 / max(dist(x_i, L_k)^((2-p)/2), epsilon)` and takes the top-`d` left
//! singular subspace of the result as `L_{k+1}`. That subspace minimizes the
//! surrogate `H(., L_k)`, so the energy sequence `F(L_k)` never increases.

use std::time::{Duration, Instant};

use crate::energy::{
    check_power, delta_from_epsilon, energy_from_distances, scaled_from_distances,
    surrogate_from_distances,
};
use crate::error::{FmsError, Result};
use crate::linalg::{
    exact_thin_svd, randomized_thin_svd, randomized_thin_svd_from, DataMatrix,
    RandomizedSvdOptions, ThinSvd,
};
use crate::preprocess::{center_and_spherize, PreprocessReport};
use crate::rng::derive_seed;
use crate::subspace::{dist_grassmann, random_subspace, Subspace};

/// Starting subspace `L_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Random,
    PcaWarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMode {
    Randomized(RandomizedSvdOptions),
    Exact,
}

impl SvdMode {
    pub fn randomized() -> Self {
        SvdMode::Randomized(RandomizedSvdOptions::default())
    }
}

/// Hyperparameters of [`fms_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmsConfig {
    /// Target subspace dimension `d`.
    pub dim: usize,
    /// Robustness power `p`, in `(0, 2)`.
    pub power: f64,
    /// Weight floor `epsilon = sqrt(p * delta)`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once `dist_grassmann(L_k, L_{k-1}) <= step_tol`.
    pub step_tol: f64,
    pub init: Init,
    pub svd: SvdMode,
    pub seed: u64,
}

impl FmsConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-20;
    pub const DEFAULT_MAX_ITERS: usize = 100;
    pub const DEFAULT_STEP_TOL: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        FmsConfig {
            dim,
            power: 1.0,
            epsilon: Self::DEFAULT_EPSILON,
            max_iters: Self::DEFAULT_MAX_ITERS,
            step_tol: Self::DEFAULT_STEP_TOL,
            init: Init::Random,
            svd: SvdMode::randomized(),
            seed: 0,
        }
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_step_tol(mut self, step_tol: f64) -> Self {
        self.step_tol = step_tol;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_svd(mut self, svd: SvdMode) -> Self {
        self.svd = svd;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `delta = epsilon^2 / p`.
    pub fn delta(&self) -> f64 {
        delta_from_epsilon(self.epsilon, self.power)
    }

    /// Checks the parameters against data of shape `ambient_dim x num_points`.
    pub fn validate(&self, ambient_dim: usize, num_points: usize) -> Result<()> {
        check_power(self.power)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(FmsError::param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.delta() == 0.0 {
            return Err(FmsError::param(format!(
                "epsilon {} underflows delta = epsilon^2 / p",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(FmsError::param("max_iters must be at least 1"));
        }
        if !(self.step_tol > 0.0) {
            return Err(FmsError::param(format!(
                "step_tol must be positive, got {}",
                self.step_tol
            )));
        }
        let limit = ambient_dim.min(num_points);
        if self.dim == 0 || self.dim >= limit {
            return Err(FmsError::dim(format!(
                "subspace dimension d = {} must satisfy 1 <= d < min(D, N) = {limit}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// One FMS update `L_{k-1} -> L_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Number of updates performed so far (first update is `k = 1`).
    pub k: usize,
    /// `F(L_k)`.
    pub energy: f64,
    /// `H(L_k, L_{k-1})`.
    pub surrogate: f64,
    /// `dist_grassmann(L_k, L_{k-1})`.
    pub step: f64,
    /// Seconds since the fit started, excluding observer callbacks.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStatus {
    Converged,
    MaxIters,
}

impl TerminalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::MaxIters => "max_iters",
        }
    }
}

/// Something worth knowing about a run that did not stop it.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceWarning {
    /// `sigma_d` and `sigma_{d+1}` of the scaled data coincide, so the
    /// minimizing subspace at this step is not unique.
    DegenerateSpectrum {
        k: usize,
        sigma_d: f64,
        sigma_next: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmsTrace {
    /// `F(L_0)`.
    pub initial_energy: f64,
    /// Regularization at which energies are reported.
    pub delta: f64,
    pub records: Vec<IterationRecord>,
    pub status: TerminalStatus,
    pub warnings: Vec<TraceWarning>,
}

impl FmsTrace {
    /// `F(L_0), F(L_1), ...`.
    pub fn energies(&self) -> Vec<f64> {
        std::iter::once(self.initial_energy)
            .chain(self.records.iter().map(|r| r.energy))
            .collect()
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_energy(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_energy, |r| r.energy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmsResult {
    pub subspace: Subspace,
    pub trace: FmsTrace,
    pub config: FmsConfig,
    pub preprocessing: Option<PreprocessReport>,
}

impl FmsResult {
    pub fn converged(&self) -> bool {
        self.trace.status == TerminalStatus::Converged
    }
}

const STREAM_INIT: u64 = 0;
const STREAM_SVD: u64 = 1;

/// Top-`k` thin SVD in the requested mode. Oversampling is clipped so the
/// sketch fits inside `min(D, N)`; `start` seeds the randomized range finder.
fn top_svd(
    a: &nalgebra::DMatrix<f64>,
    k: usize,
    mode: SvdMode,
    seed: u64,
    start: Option<&nalgebra::DMatrix<f64>>,
) -> Result<ThinSvd> {
    match mode {
        SvdMode::Exact => exact_thin_svd(a, k),
        SvdMode::Randomized(opts) => {
            let room = a.nrows().min(a.ncols()).saturating_sub(k);
            let opts = RandomizedSvdOptions {
                oversampling: opts.oversampling.min(room),
                ..opts
            };
            match start {
                Some(s) => randomized_thin_svd_from(a, k, s, opts, seed),
                None => randomized_thin_svd(a, k, opts, seed),
            }
        }
    }
}

fn leading_subspace(svd: &ThinSvd, d: usize) -> Subspace {
    Subspace::from_basis_unchecked(svd.u.columns(0, d).into_owned())
}

/// Span of the top-`d` left singular vectors of `x` (uncentered PCA).
pub fn pca_fit(x: &DataMatrix, d: usize, svd: SvdMode, seed: u64) -> Result<Subspace> {
    let svd = top_svd(x.as_matrix(), d, svd, seed, None)?;
    Ok(leading_subspace(&svd, d))
}

/// Accumulates wall time only while running.
struct Stopwatch {
    total: Duration,
    since: Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            total: Duration::ZERO,
            since: Instant::now(),
        }
    }

    fn pause(&mut self) -> f64 {
        self.total += self.since.elapsed();
        self.total.as_secs_f64()
    }

    fn resume(&mut self) {
        self.since = Instant::now();
    }
}

/// Fits a `d`-subspace to (already centered) data with FMS.
pub fn fms_fit(x: &DataMatrix, config: &FmsConfig) -> Result<FmsResult> {
    fms_fit_observed(x, config, |_, _| {})
}

/// [`fms_fit`] with a callback invoked on `L_0` and after every update as
/// `observer(k, &L_k)`. Time spent in the callback is excluded from the
/// trace.
pub fn fms_fit_observed<F>(x: &DataMatrix, config: &FmsConfig, mut observer: F) -> Result<FmsResult>
where
    F: FnMut(usize, &Subspace),
{
    let (ambient, n) = (x.ambient_dim(), x.num_points());
    config.validate(ambient, n)?;
    let (p, eps, d) = (config.power, config.epsilon, config.dim);
    let delta = config.delta();
    let data = x.as_matrix();

    let mut clock = Stopwatch::start();
    let init_seed = derive_seed(config.seed, &[STREAM_INIT]);
    let mut current = match config.init {
        Init::Random => random_subspace(ambient, d, init_seed)?,
        Init::PcaWarmStart => pca_fit(x, d, config.svd, init_seed)?,
    };
    let mut dists = current.distances(data)?;
    let initial_energy = energy_from_distances(&dists, p, delta);
    clock.pause();
    observer(0, &current);
    clock.resume();

    // The randomized range finder starts from the current basis plus one
    // fixed Gaussian sketch. Fixed points of the exact iteration are then
    // fixed points of the randomized one, and steps can shrink below
    // step_tol instead of stalling at the sketch noise.
    let svd_seed = derive_seed(config.seed, &[STREAM_SVD]);
    // One extra singular value lets us detect sigma_d == sigma_{d+1}.
    let k_svd = if d < ambient.min(n) { d + 1 } else { d };
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut status = TerminalStatus::MaxIters;

    for k in 1..=config.max_iters {
        let y = scaled_from_distances(data, &dists, p, eps);
        let svd = top_svd(&y, k_svd, config.svd, svd_seed, Some(current.basis()))?;
        if k_svd > d {
            let (sd, snext) = (svd.s[d - 1], svd.s[d]);
            if sd > 0.0 && sd - snext <= 1e-12 * svd.s[0] {
                warnings.push(TraceWarning::DegenerateSpectrum {
                    k,
                    sigma_d: sd,
                    sigma_next: snext,
                });
            }
        }
        let next = leading_subspace(&svd, d);
        let next_dists = next.distances(data)?;
        let energy = energy_from_distances(&next_dists, p, delta);
        let surrogate = surrogate_from_distances(&next_dists, &dists, p, delta);
        let step = dist_grassmann(&next, &current)?;
        let elapsed_s = clock.pause();
        records.push(IterationRecord {
            k,
            energy,
            surrogate,
            step,
            elapsed_s,
        });
        observer(k, &next);
        clock.resume();

        current = next;
        dists = next_dists;
        if step <= config.step_tol {
            status = TerminalStatus::Converged;
            break;
        }
    }

    Ok(FmsResult {
        subspace: current,
        trace: FmsTrace {
            initial_energy,
            delta,
            records,
            status,
            warnings,
        },
        config: *config,
        preprocessing: None,
    })
}

/// Centers at the geometric median (optionally spherizing) before fitting.
pub fn fms_fit_preprocessed(
    x: &DataMatrix,
    config: &FmsConfig,
    spherize: bool,
) -> Result<FmsResult> {
    let (centered, report) = center_and_spherize(x, spherize)?;
    let mut result = fms_fit(&centered, config)?;
    result.preprocessing = Some(report);
    Ok(result)
}
