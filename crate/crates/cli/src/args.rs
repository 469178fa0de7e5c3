use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fms::bench::Algorithm;
use fms::{Init, SvdMode};

use crate::error::exit;

const EXIT_CODES: &str = "Exit codes: 0 success (fit converged), 2 fit stopped at --max-iters, \
10 usage or parameter error, 11 malformed input, 12 numerical failure, 13 output error.";

#[derive(Debug, Parser)]
#[command(name = "fms", version, about = "Robust subspace recovery with Fast Median Subspace", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a d-dimensional subspace to a CSV file of points (one per row).
    Fit(FitArgs),
    /// Generate needle-haystack data with its ground-truth subspace.
    Synth(SynthArgs),
    /// Run a synthetic benchmark sweep.
    Sweep(SweepArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Pca,
}

impl From<InitArg> for Init {
    fn from(a: InitArg) -> Init {
        match a {
            InitArg::Random => Init::Random,
            InitArg::Pca => Init::PcaWarmStart,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SvdArg {
    Randomized,
    Exact,
}

impl From<SvdArg> for SvdMode {
    fn from(a: SvdArg) -> SvdMode {
        match a {
            SvdArg::Randomized => SvdMode::randomized(),
            SvdArg::Exact => SvdMode::Exact,
        }
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

/// Flags shared by every command that runs FMS.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Robustness power p, in (0, 2).
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    /// Weight floor epsilon; the traced energy uses delta = epsilon^2 / p.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Stop once consecutive subspaces are this close.
    #[arg(long, default_value_t = 1e-8)]
    pub step_tol: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    #[arg(long, value_enum, default_value_t = SvdArg::Randomized)]
    pub svd: SvdArg,
    /// Master seed [env: FMS_SEED; default 0].
    #[arg(long, env = "FMS_SEED", hide_env = true)]
    pub seed: Option<u64>,
}

impl SolverArgs {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn push_argv(&self, argv: &mut Vec<String>) {
        push(argv, "--power", self.power);
        push(argv, "--epsilon", self.epsilon);
        push(argv, "--max-iters", self.max_iters);
        push(argv, "--step-tol", self.step_tol);
        push(argv, "--init", value_name(self.init));
        push(argv, "--svd", value_name(self.svd));
        push(argv, "--seed", self.seed());
    }
}

fn push(argv: &mut Vec<String>, flag: &str, value: impl ToString) {
    argv.push(flag.to_string());
    argv.push(value.to_string());
}

fn push_path(argv: &mut Vec<String>, flag: &str, path: &std::path::Path) {
    push(argv, flag, path.display());
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV file, one point per row; a non-numeric first row is a header.
    pub input: PathBuf,
    /// Subspace dimension d.
    #[arg(long)]
    pub dim: usize,
    /// Center at the geometric median first (default).
    #[arg(long, overrides_with = "no_center")]
    pub center: bool,
    /// Fit a linear subspace through the origin without centering.
    #[arg(long = "no-center", overrides_with = "center")]
    pub no_center: bool,
    /// Scale every (centered) point to unit norm before fitting.
    #[arg(long)]
    pub spherize: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for basis.csv, trace.csv and manifest.txt.
    #[arg(long)]
    pub out: PathBuf,
}

impl FitArgs {
    pub fn centered(&self) -> bool {
        !self.no_center
    }

    pub fn to_argv(&self) -> Vec<String> {
        let mut argv = vec!["fit".to_string(), self.input.display().to_string()];
        push(&mut argv, "--dim", self.dim);
        argv.push(
            if self.centered() {
                "--center"
            } else {
                "--no-center"
            }
            .to_string(),
        );
        if self.spherize {
            argv.push("--spherize".to_string());
        }
        self.solver.push_argv(&mut argv);
        push_path(&mut argv, "--out", &self.out);
        argv
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Ambient dimension D.
    #[arg(long, default_value_t = 100)]
    pub ambient_dim: usize,
    /// Subspace dimension d.
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub n_in: usize,
    #[arg(long, default_value_t = 100)]
    pub n_out: usize,
    /// Outlier variance scale.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Per-coordinate noise variance.
    #[arg(long, default_value_t = 1e-6)]
    pub noise: f64,
    /// Master seed [env: FMS_SEED; default 0].
    #[arg(long, env = "FMS_SEED", hide_env = true)]
    pub seed: Option<u64>,
    /// Output directory for data.csv, truth.csv, labels.csv and manifest.txt.
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn to_argv(&self) -> Vec<String> {
        let mut argv = vec!["synth".to_string()];
        push(&mut argv, "--ambient-dim", self.ambient_dim);
        push(&mut argv, "--dim", self.dim);
        push(&mut argv, "--n-in", self.n_in);
        push(&mut argv, "--n-out", self.n_out);
        push(&mut argv, "--lambda", self.lambda);
        push(&mut argv, "--noise", self.noise);
        push(&mut argv, "--seed", self.seed());
        push_path(&mut argv, "--out", &self.out);
        argv
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Error versus outlier fraction (D=100, d=5, N=200).
    Fraction,
    /// Error and runtime versus ambient dimension (N=2000, half outliers).
    Dimension,
    /// Error versus outlier variance scale (D=100, d=5, 100+100 points).
    Variance,
    /// Per-iteration traces for both initializations (D=500, d=5, 500+500).
    Convergence,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: fms::FmsError| e.to_string())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// Outlier fractions [default: 0,0.1,...,0.9].
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Ambient dimensions [default: 100,200,400,800; with --full-scale 100,200,...,1000].
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Outlier variance scales [default: 0.25,1,4,16].
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Noise variances for the convergence traces [default: 0,1e-6].
    #[arg(long, value_delimiter = ',')]
    pub noise_levels: Option<Vec<f64>>,
    /// Use the full ambient-dimension grid of the original experiments.
    #[arg(long)]
    pub full_scale: bool,
    /// Ambient dimension of the base data set [default depends on --kind].
    #[arg(long)]
    pub ambient_dim: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    /// Inlier count of the base data set [default depends on --kind].
    #[arg(long)]
    pub n_in: Option<usize>,
    /// Outlier count of the base data set [default depends on --kind].
    #[arg(long)]
    pub n_out: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub noise: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Comma-separated algorithms: fms<p> (e.g. fms1, fms0.1) or pca.
    #[arg(long, value_parser = parse_algorithm, value_delimiter = ',', default_value = "fms1,pca")]
    pub algorithms: Vec<Algorithm>,
    /// Iterations per convergence trace.
    #[arg(long, default_value_t = 15)]
    pub iterations: usize,
    /// Run trials one at a time instead of on all cores.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for sweep.csv (or convergence.csv) and manifest.txt.
    #[arg(long)]
    pub out: PathBuf,
}

/// Base data set and grid of one sweep after per-kind defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSweep {
    pub ambient_dim: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub fractions: Vec<f64>,
    pub dims: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub noise_levels: Vec<f64>,
}

impl SweepArgs {
    pub fn resolve(&self) -> ResolvedSweep {
        let (ambient_dim, n_in, n_out) = match self.kind {
            SweepKind::Fraction => (100, 200, 0),
            SweepKind::Dimension => (100, 1000, 1000),
            SweepKind::Variance => (100, 100, 100),
            SweepKind::Convergence => (500, 500, 500),
        };
        let dims = if self.full_scale {
            (1..=10).map(|i| 100 * i).collect()
        } else {
            vec![100, 200, 400, 800]
        };
        ResolvedSweep {
            ambient_dim: self.ambient_dim.unwrap_or(ambient_dim),
            n_in: self.n_in.unwrap_or(n_in),
            n_out: self.n_out.unwrap_or(n_out),
            fractions: self
                .fractions
                .clone()
                .unwrap_or_else(|| (0..10).map(|i| i as f64 / 10.0).collect()),
            dims: self.dims.clone().unwrap_or(dims),
            lambdas: self
                .lambdas
                .clone()
                .unwrap_or_else(|| vec![0.25, 1.0, 4.0, 16.0]),
            noise_levels: self.noise_levels.clone().unwrap_or_else(|| vec![0.0, 1e-6]),
        }
    }

    pub fn to_argv(&self) -> Vec<String> {
        let r = self.resolve();
        let mut argv = vec!["sweep".to_string()];
        push(&mut argv, "--kind", value_name(self.kind));
        push(&mut argv, "--fractions", join(&r.fractions));
        push(&mut argv, "--dims", join(&r.dims));
        push(&mut argv, "--lambdas", join(&r.lambdas));
        push(&mut argv, "--noise-levels", join(&r.noise_levels));
        push(&mut argv, "--ambient-dim", r.ambient_dim);
        push(&mut argv, "--dim", self.dim);
        push(&mut argv, "--n-in", r.n_in);
        push(&mut argv, "--n-out", r.n_out);
        push(&mut argv, "--lambda", self.lambda);
        push(&mut argv, "--noise", self.noise);
        push(&mut argv, "--trials", self.trials);
        let algs: Vec<String> = self.algorithms.iter().map(Algorithm::id).collect();
        push(&mut argv, "--algorithms", algs.join(","));
        push(&mut argv, "--iterations", self.iterations);
        if self.sequential {
            argv.push("--sequential".to_string());
        }
        self.solver.push_argv(&mut argv);
        push_path(&mut argv, "--out", &self.out);
        argv
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps clap's own errors to the documented exit codes.
pub fn clap_exit_code(err: &clap::Error) -> u8 {
    use clap::error::ErrorKind;
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
        _ => exit::USAGE,
    }
}
