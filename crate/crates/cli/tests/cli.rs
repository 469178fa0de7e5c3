use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fms"))
        .args(args)
        .env_remove("FMS_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Points on the line through `offset` along `dir`, plus two outliers placed
/// symmetrically about `offset` so the geometric median stays on the line.
fn write_line_data(path: &Path, offset: [f64; 3]) {
    let dir = [1.0, 2.0, -0.5];
    let off_line = [2.0, -1.0, 0.0];
    let mut rows: Vec<[f64; 3]> = (-15..=15)
        .map(|i| {
            let t = i as f64 / 3.0;
            [0, 1, 2].map(|j| offset[j] + t * dir[j])
        })
        .collect();
    rows.push([0, 1, 2].map(|j| offset[j] + off_line[j]));
    rows.push([0, 1, 2].map(|j| offset[j] - off_line[j]));
    let mut text = String::from("x,y,z\n");
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r[0], r[1], r[2]));
    }
    fs::write(path, text).unwrap();
}

fn unit_line_distance(basis: &[Vec<f64>]) -> f64 {
    let dir = [1.0, 2.0, -0.5];
    let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    let dot: f64 = (0..3).map(|j| basis[j][0] * dir[j] / norm).sum();
    (1.0 - dot * dot).max(0.0).sqrt()
}

#[test]
fn fit_recovers_a_line_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    write_line_data(&input, [0.0; 3]);
    let out = dir.path().join("out");
    let o = fms(&[
        "fit",
        p(&input),
        "--dim",
        "1",
        "--svd",
        "exact",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let basis = read_matrix(&out.join("basis.csv"));
    assert_eq!((basis.len(), basis[0].len()), (3, 1));
    assert!(unit_line_distance(&basis) < 1e-8);

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "k,energy,surrogate,step,elapsed_s");
    assert!(lines.len() - 2 <= 3, "{trace}");
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("result.status = converged"));
    assert!(manifest.contains("config.seed_source = default"));
    assert!(out.join("center.csv").exists());
}

#[test]
fn malformed_input_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "1,2,3\n4,oops,6\n").unwrap();
    let out = dir.path().join("out");
    let o = fms(&["fit", p(&input), "--dim", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 11);
    assert!(stderr(&o).contains("row 2, column 2"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn dimension_too_large_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    write_line_data(&input, [0.0; 3]);
    let o = fms(&[
        "fit",
        p(&input),
        "--dim",
        "3",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 10);
    assert!(stderr(&o).contains("min(D, N)"));
    let o = fms(&[
        "fit",
        p(&input),
        "--dim",
        "1",
        "--power",
        "2",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 10, "{}", stderr(&o));
}

#[test]
fn centering_removes_a_translation() {
    let dir = tempfile::tempdir().unwrap();
    let shifted = dir.path().join("shifted.csv");
    write_line_data(&shifted, [10.0, -7.0, 3.0]);
    let run = |flag: &str, name: &str| {
        let out = dir.path().join(name);
        let o = fms(&[
            "fit",
            p(&shifted),
            "--dim",
            "1",
            flag,
            "--svd",
            "exact",
            "--out",
            p(&out),
        ]);
        assert!(code(&o) == 0 || code(&o) == 2, "{}", stderr(&o));
        unit_line_distance(&read_matrix(&out.join("basis.csv")))
    };
    assert!(run("--center", "c") < 1e-6);
    assert!(run("--no-center", "n") > 1e-2);
}

#[test]
fn synth_without_noise_lies_on_the_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = fms(&[
        "synth",
        "--ambient-dim",
        "8",
        "--dim",
        "2",
        "--n-in",
        "20",
        "--n-out",
        "0",
        "--noise",
        "0",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let data = read_matrix(&out.join("data.csv"));
    let truth = read_matrix(&out.join("truth.csv"));
    assert_eq!((data.len(), data[0].len()), (20, 8));
    for x in &data {
        let coef: Vec<f64> = (0..2)
            .map(|j| (0..8).map(|i| truth[i][j] * x[i]).sum())
            .collect();
        let resid: f64 = (0..8)
            .map(|i| (x[i] - truth[i][0] * coef[0] - truth[i][1] * coef[1]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-12, "{resid}");
    }
    let labels = fs::read_to_string(out.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 21);
}

#[test]
fn synth_is_reproducible_and_honors_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, env_seed: Option<&str>, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fms"));
        cmd.args([
            "synth",
            "--ambient-dim",
            "6",
            "--dim",
            "2",
            "--n-in",
            "10",
            "--n-out",
            "5",
        ])
        .args(extra)
        .args(["--out", p(&out)])
        .env_remove("FMS_SEED");
        if let Some(s) = env_seed {
            cmd.env("FMS_SEED", s);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(out.join("data.csv")).unwrap()
    };
    let a = gen("a", None, &["--seed", "9"]);
    assert_eq!(a, gen("b", None, &["--seed", "9"]));
    assert_eq!(a, gen("c", Some("9"), &[]));
    assert_ne!(a, gen("d", None, &[]));
    assert_eq!(a, gen("e", Some("4"), &["--seed", "9"]));
}

#[test]
fn fraction_past_the_bound_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = fms(&[
        "sweep",
        "--kind",
        "fraction",
        "--ambient-dim",
        "10",
        "--dim",
        "5",
        "--fractions",
        "0.2,0.6",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 10);
    assert!(stderr(&o).contains("(D-d)/D"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn small_sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = fms(&[
        "sweep",
        "--kind",
        "variance",
        "--ambient-dim",
        "20",
        "--dim",
        "2",
        "--n-in",
        "30",
        "--n-out",
        "10",
        "--lambdas",
        "1,4",
        "--trials",
        "2",
        "--algorithms",
        "fms1,fms0.5,pca",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(csv.contains(",FMS_0.5,"));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("outputs = sweep.csv"));
}

#[test]
fn convergence_sweep_traces_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cv");
    let o = fms(&[
        "sweep",
        "--kind",
        "convergence",
        "--ambient-dim",
        "30",
        "--dim",
        "2",
        "--n-in",
        "40",
        "--n-out",
        "40",
        "--trials",
        "1",
        "--step-tol",
        "1e-300",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    // Two noise levels, two starts, iterates 0..=15.
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 16);
    assert!(csv
        .lines()
        .any(|l| l.contains(",pca,0,") && l.split(',').nth(4) == Some("15")));
}

#[test]
fn replay_reproduces_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s");
    assert_eq!(
        code(&fms(&[
            "synth",
            "--ambient-dim",
            "12",
            "--dim",
            "3",
            "--n-in",
            "40",
            "--n-out",
            "20",
            "--seed",
            "5",
            "--out",
            p(&data)
        ])),
        0
    );
    let first = dir.path().join("f1");
    let o = fms(&[
        "fit",
        p(&data.join("data.csv")),
        "--dim",
        "3",
        "--power",
        "0.5",
        "--seed",
        "3",
        "--out",
        p(&first),
    ]);
    assert!(code(&o) == 0 || code(&o) == 2, "{}", stderr(&o));

    let second = dir.path().join("f2");
    let o = fms(&[
        "replay",
        p(&first.join("manifest.txt")),
        "--out",
        p(&second),
    ]);
    assert_eq!(
        code(&fms(&[
            "fit",
            p(&data.join("data.csv")),
            "--dim",
            "3",
            "--power",
            "0.5",
            "--seed",
            "3",
            "--out",
            p(&dir.path().join("f3"))
        ])),
        code(&o)
    );
    assert_eq!(
        fs::read(first.join("basis.csv")).unwrap(),
        fs::read(second.join("basis.csv")).unwrap()
    );

    let drop_time = |path: &Path| -> Vec<String> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(
        drop_time(&first.join("trace.csv")),
        drop_time(&second.join("trace.csv"))
    );
    let manifest = fs::read_to_string(second.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.seed_source = manifest"));
    assert!(manifest.contains("replayed_from = "));
}

#[test]
fn help_and_unknown_flags() {
    let o = fms(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("Exit codes"));
    assert_eq!(code(&fms(&["fit", "--bogus"])), 10);
}
