use std::path::Path;

use fms::bench::{
    convergence_trace_experiment, format_float, generate_haystack, sweep_ambient_dim,
    sweep_outlier_fraction, sweep_variance_ratio, write_convergence_csv, write_trial_csv,
    ConvergenceSpec, Execution, HaystackSpec, SweepSettings, TrialRecord,
};
use fms::fit::TraceWarning;
use fms::preprocess::{center_and_spherize, spherize};
use fms::{fms_fit, FmsConfig, FmsResult, Init};

use crate::args::{Cli, Command, FitArgs, ReplayArgs, SolverArgs, SweepArgs, SweepKind, SynthArgs};
use crate::error::{exit, CliError, CliResult};
use crate::io::{numeric_csv, points_csv, read_points, OutputDir};
use crate::manifest::{self, RunManifest};

/// Where the seed and epsilon values came from, recorded in the manifest.
#[derive(Debug, Clone, Copy)]
pub struct Sources {
    pub seed: &'static str,
    pub epsilon: &'static str,
}

impl Sources {
    const REPLAY: Sources = Sources {
        seed: "manifest",
        epsilon: "manifest",
    };
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: Cli, sources: Sources) -> CliResult<u8> {
    match cli.command {
        Command::Fit(a) => fit(&a, sources, None),
        Command::Synth(a) => synth(&a, sources, None),
        Command::Sweep(a) => sweep(&a, sources, None),
        Command::Replay(a) => replay(&a),
    }
}

fn solver_config(dim: usize, s: &SolverArgs) -> FmsConfig {
    FmsConfig::new(dim)
        .with_power(s.power)
        .with_epsilon(s.epsilon)
        .with_max_iters(s.max_iters)
        .with_step_tol(s.step_tol)
        .with_init(s.init.into())
        .with_svd(s.svd.into())
        .with_seed(s.seed())
}

fn record_solver(m: &mut RunManifest, s: &SolverArgs, sources: Sources) {
    m.set("config.power", s.power);
    m.set("config.epsilon", format_float(s.epsilon));
    m.set("config.epsilon_source", sources.epsilon);
    m.set("config.max_iters", s.max_iters);
    m.set("config.step_tol", format_float(s.step_tol));
    m.set("config.init", format!("{:?}", s.init).to_lowercase());
    m.set("config.svd", format!("{:?}", s.svd).to_lowercase());
    m.set("config.seed", s.seed());
    m.set("config.seed_source", sources.seed);
}

fn finish(mut out: OutputDir, mut m: RunManifest, names: &[&str]) -> CliResult<()> {
    m.set("outputs", names.join(","));
    m.set("finished", manifest::timestamp());
    out.stage(manifest::FILE_NAME, m.to_text().as_bytes())?;
    out.commit()?;
    Ok(())
}

fn trace_csv(result: &FmsResult) -> String {
    let t = &result.trace;
    let mut text = String::from("k,energy,surrogate,step,elapsed_s\n");
    text.push_str(&format!(
        "0,{},,,{}\n",
        format_float(t.initial_energy),
        format_float(0.0)
    ));
    for r in &t.records {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k,
            format_float(r.energy),
            format_float(r.surrogate),
            format_float(r.step),
            format_float(r.elapsed_s)
        ));
    }
    text
}

fn fit(args: &FitArgs, sources: Sources, replayed: Option<&Path>) -> CliResult<u8> {
    let x = read_points(&args.input)?;
    let (ambient, n) = (x.ambient_dim(), x.num_points());
    if args.dim == 0 || args.dim >= ambient.min(n) {
        return Err(CliError::Usage(format!(
            "--dim {} must satisfy 0 < d < min(D, N) = {} for {n} points in dimension {ambient}",
            args.dim,
            ambient.min(n)
        )));
    }
    let config = solver_config(args.dim, &args.solver);
    config.validate(ambient, n)?;

    let mut center = None;
    let mut dropped = Vec::new();
    let mut result = if args.centered() {
        let (prepared, report) = center_and_spherize(&x, args.spherize)?;
        dropped.clone_from(&report.dropped_points);
        center = Some(report.center.clone());
        let mut r = fms_fit(&prepared, &config)?;
        r.preprocessing = Some(report);
        r
    } else if args.spherize {
        let (prepared, d) = spherize(&x)?;
        dropped = d;
        fms_fit(&prepared, &config)?
    } else {
        fms_fit(&x, &config)?
    };
    result.config = config;

    for w in &result.trace.warnings {
        let TraceWarning::DegenerateSpectrum {
            k,
            sigma_d,
            sigma_next,
        } = w;
        eprintln!(
            "warning: iteration {k}: singular values {sigma_d:e} and {sigma_next:e} coincide; \
             the update is not unique"
        );
    }
    if !dropped.is_empty() {
        eprintln!(
            "warning: dropped {} zero point(s) before fitting",
            dropped.len()
        );
    }

    let mut out = OutputDir::create(&args.out)?;
    let basis = result.subspace.basis();
    out.stage(
        "basis.csv",
        numeric_csv(
            basis
                .row_iter()
                .map(|r| r.iter().copied().collect::<Vec<_>>()),
        )
        .as_bytes(),
    )?;
    out.stage("trace.csv", trace_csv(&result).as_bytes())?;
    let mut names = vec!["basis.csv", "trace.csv"];
    if let Some(c) = &center {
        out.stage("center.csv", numeric_csv([c.iter().copied()]).as_bytes())?;
        names.push("center.csv");
    }

    // Record the input by absolute path so replays work from any directory.
    let recorded = FitArgs {
        input: std::fs::canonicalize(&args.input).unwrap_or_else(|_| args.input.clone()),
        ..args.clone()
    };
    let mut m = RunManifest::new("fit", &recorded.to_argv());
    if let Some(p) = replayed {
        m.set("replayed_from", p.display());
    }
    m.set("input", recorded.input.display());
    m.set("input.points", n);
    m.set("input.ambient_dim", ambient);
    m.set("config.dim", args.dim);
    m.set("config.center", args.centered());
    m.set("config.spherize", args.spherize);
    record_solver(&mut m, &args.solver, sources);
    m.set("config.delta", format_float(config.delta()));
    m.set("result.status", result.trace.status.as_str());
    m.set("result.iterations", result.trace.iterations());
    m.set(
        "result.initial_energy",
        format_float(result.trace.initial_energy),
    );
    m.set(
        "result.final_energy",
        format_float(result.trace.final_energy()),
    );
    m.set(
        "dropped_points",
        dropped
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    m.set("warnings", result.trace.warnings.len());
    finish(out, m, &names)?;

    println!(
        "{} after {} iteration(s); energy {} -> {}; outputs in {}",
        result.trace.status.as_str(),
        result.trace.iterations(),
        format_float(result.trace.initial_energy),
        format_float(result.trace.final_energy()),
        args.out.display()
    );
    Ok(if result.converged() {
        exit::OK
    } else {
        exit::MAX_ITERS
    })
}

fn synth(args: &SynthArgs, sources: Sources, replayed: Option<&Path>) -> CliResult<u8> {
    let spec = HaystackSpec {
        ambient_dim: args.ambient_dim,
        dim: args.dim,
        n_in: args.n_in,
        n_out: args.n_out,
        lambda: args.lambda,
        noise_var: args.noise,
        seed: args.seed(),
    };
    let hay = generate_haystack(&spec)?;

    let mut out = OutputDir::create(&args.out)?;
    out.stage("data.csv", points_csv(&hay.data).as_bytes())?;
    let basis = hay.truth.basis();
    out.stage(
        "truth.csv",
        numeric_csv(
            basis
                .row_iter()
                .map(|r| r.iter().copied().collect::<Vec<_>>()),
        )
        .as_bytes(),
    )?;
    let mut labels = String::from("outlier\n");
    for &o in &hay.is_outlier {
        labels.push_str(if o { "1\n" } else { "0\n" });
    }
    out.stage("labels.csv", labels.as_bytes())?;

    let mut m = RunManifest::new("synth", &args.to_argv());
    if let Some(p) = replayed {
        m.set("replayed_from", p.display());
    }
    m.set("config.seed", args.seed());
    m.set("config.seed_source", sources.seed);
    m.set("outlier_fraction", spec.outlier_fraction());
    m.set("fraction_bound", spec.fraction_bound());
    finish(out, m, &["data.csv", "truth.csv", "labels.csv"])?;
    if spec.check_fraction_bound().is_err() {
        eprintln!(
            "warning: outlier fraction {} is at or above the recoverability bound {}",
            spec.outlier_fraction(),
            spec.fraction_bound()
        );
    }
    println!(
        "wrote {} points to {}",
        spec.num_points(),
        args.out.display()
    );
    Ok(exit::OK)
}

/// Mean error and runtime per grid value and algorithm, in first-seen order.
fn summarize(records: &[TrialRecord], kind: SweepKind) {
    let mut rows: Vec<(String, String, f64, f64, usize)> = Vec::new();
    for r in records {
        let key = match kind {
            SweepKind::Fraction => format!("fraction={}", r.fraction),
            SweepKind::Dimension => format!("D={}", r.ambient_dim),
            _ => format!("lambda={}", r.lambda),
        };
        match rows.iter_mut().find(|e| e.0 == key && e.1 == r.algorithm) {
            Some(e) => {
                e.2 += r.error;
                e.3 += r.runtime_s;
                e.4 += 1;
            }
            None => rows.push((key, r.algorithm.clone(), r.error, r.runtime_s, 1)),
        }
    }
    for (key, alg, err, time, count) in rows {
        let c = count as f64;
        println!(
            "{key:<16} {alg:<10} mean error {:.3e}  mean runtime {:.3e} s",
            err / c,
            time / c
        );
    }
}

fn sweep(args: &SweepArgs, sources: Sources, replayed: Option<&Path>) -> CliResult<u8> {
    let r = args.resolve();
    let s = &args.solver;
    let settings = SweepSettings {
        trials: args.trials,
        algorithms: args.algorithms.clone(),
        epsilon: s.epsilon,
        max_iters: s.max_iters,
        step_tol: s.step_tol,
        init: s.init.into(),
        svd: s.svd.into(),
        seed: s.seed(),
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let base = HaystackSpec {
        ambient_dim: r.ambient_dim,
        dim: args.dim,
        n_in: r.n_in,
        n_out: r.n_out,
        lambda: args.lambda,
        noise_var: args.noise,
        seed: s.seed(),
    };

    let (name, text) = if args.kind == SweepKind::Convergence {
        let spec = ConvergenceSpec {
            ambient_dim: r.ambient_dim,
            dim: args.dim,
            n_in: r.n_in,
            n_out: r.n_out,
            noise_levels: r.noise_levels.clone(),
            inits: vec![Init::Random, Init::PcaWarmStart],
            iterations: args.iterations,
            trials: args.trials,
            power: s.power,
        };
        let rows = convergence_trace_experiment(&spec, &settings)?;
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).expect("writing to memory");
        for row in rows.iter().filter(|row| row.k == args.iterations) {
            println!(
                "noise={:<8} init={:<6} trial={} error after {} iterations {:.3e}",
                row.noise_var,
                fms::bench::init_name(row.init),
                row.trial,
                row.k,
                row.error
            );
        }
        ("convergence.csv", buf)
    } else {
        let records = match args.kind {
            SweepKind::Fraction => sweep_outlier_fraction(&base, &r.fractions, &settings)?,
            SweepKind::Dimension => sweep_ambient_dim(&base, &r.dims, &settings)?,
            _ => sweep_variance_ratio(&base, &r.lambdas, &settings)?,
        };
        let mut buf = Vec::new();
        write_trial_csv(&records, &mut buf).expect("writing to memory");
        summarize(&records, args.kind);
        ("sweep.csv", buf)
    };

    let mut out = OutputDir::create(&args.out)?;
    out.stage(name, &text)?;
    let mut m = RunManifest::new("sweep", &args.to_argv());
    if let Some(p) = replayed {
        m.set("replayed_from", p.display());
    }
    record_solver(&mut m, s, sources);
    finish(out, m, &[name])?;
    Ok(exit::OK)
}

fn replay(args: &ReplayArgs) -> CliResult<u8> {
    let recorded = RunManifest::read(&args.manifest)?;
    let mut argv = recorded.argv();
    if argv.is_empty() {
        return Err(CliError::input(
            &args.manifest,
            "manifest records no command line",
        ));
    }
    if let Some(out) = &args.out {
        match argv.iter().position(|a| a == "--out") {
            Some(i) if i + 1 < argv.len() => argv[i + 1] = out.display().to_string(),
            _ => {
                argv.push("--out".into());
                argv.push(out.display().to_string());
            }
        }
    }
    let cli = <Cli as clap::Parser>::try_parse_from(std::iter::once("fms".to_string()).chain(argv))
        .map_err(|e| {
            CliError::input(&args.manifest, format!("recorded command is invalid: {e}"))
        })?;
    let from = Some(args.manifest.as_path());
    match cli.command {
        Command::Fit(a) => fit(&a, Sources::REPLAY, from),
        Command::Synth(a) => synth(&a, Sources::REPLAY, from),
        Command::Sweep(a) => sweep(&a, Sources::REPLAY, from),
        Command::Replay(_) => Err(CliError::input(
            &args.manifest,
            "a manifest cannot record a replay",
        )),
    }
}
