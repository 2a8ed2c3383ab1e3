use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symflow::cli::{verify_exit_code, EXIT_VERIFY};
use symflow::linalg::Matrix;
use symflow::rules::{m2s_subspace_factor, rule_rhs, RuleSpec};
use symflow::verify::VerifyOptions;

fn symflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

const BASE: [&str; 12] = [
    "--preset", "spaced", "--backprojection", "exact", "--gamma", "1", "--steps", "20000",
    "--subsample", "100", "--seed", "7",
];

fn run_to(dir: &Path, name: &str, rule: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec!["run"];
    args.extend_from_slice(rule);
    args.extend_from_slice(&BASE);
    args.extend(["--out", out.to_str().unwrap()]);
    let o = symflow(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn run_writes_sampled_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), "t.csv", &["--rule", "n2s"]);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "step,e_o,e_p");
    // steps 0, 100, ..., 20000; the final step is a multiple of 100
    assert_eq!(lines.len() - 1, 201);
    assert!(lines[1].starts_with("0,"));
    assert!(lines.last().unwrap().starts_with("20000,"));
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), 3);
        for v in &f[1..] {
            let mantissa = v.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "17 significant digits in {v}");
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn m2s_at_zero_alpha_matches_n2s_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_to(dir.path(), "a.csv", &["--rule", "m2s", "--alpha", "0"]);
    let b = run_to(dir.path(), "b.csv", &["--rule", "n2s"]);
    let c = run_to(dir.path(), "c.csv", &["--rule", "n2s"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&b).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn zero_steps_gives_one_row() {
    let o = symflow(&["run", "--rule", "oja", "--steps", "0"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn usage_errors_exit_1_and_name_the_flag() {
    for (args, flag) in [
        (vec!["run", "--rule", "pca"], "--rule"),
        (vec!["run", "--rule", "n2s", "--preset", "dense"], "--preset"),
        (vec!["run", "--rule", "n2s", "--backprojection", "qr"], "--backprojection"),
    ] {
        let o = symflow(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(flag), "{args:?}");
    }
    assert_eq!(symflow(&["run"]).status.code(), Some(1));
    assert_eq!(symflow(&["--version"]).status.code(), Some(0));
}

#[test]
fn divergence_exits_2() {
    let o = symflow(&[
        "run", "--rule", "n2s", "--backprojection", "none", "--gamma", "1e6", "--steps", "100",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged at step"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"rule": "m2s", "alpha": 5, "eigenvalues": [4, 3, 2, 1, 0.5], "m": 2, "steps": 30, "subsample": 10, "gamma": 0.5}"#,
    )
    .unwrap();
    let from_file = symflow(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    assert_eq!(String::from_utf8_lossy(&from_file.stdout).lines().count(), 1 + 4);

    let overridden = symflow(&["run", "--config", cfg.to_str().unwrap(), "--steps", "5"]);
    assert!(overridden.status.success());
    let text = String::from_utf8(overridden.stdout).unwrap();
    assert_eq!(text.lines().last().unwrap().split(',').next(), Some("5"));

    fs::write(&cfg, r#"{"rule": "n2s", "colour": "red"}"#).unwrap();
    assert_eq!(symflow(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

fn check_figure(preset: &str, steps: usize) {
    let dir = tempfile::tempdir().unwrap();
    let o = symflow(&["figure", preset, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut csvs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    assert_eq!(csvs.len(), 7);
    let mut first_rows = Vec::new();
    for p in &csvs {
        let text = fs::read_to_string(p).unwrap();
        assert!(text.starts_with("# config: {"));
        let lines = data_lines(p);
        assert_eq!(lines.len() - 1, steps / 100 + 1);
        assert!(lines.last().unwrap().starts_with(&format!("{steps},")));
        first_rows.push(lines[1].clone());
    }
    // Shared initial W: step-0 errors agree across rules.
    assert!(first_rows.windows(2).all(|w| w[0] == w[1]));
    let svg = fs::read_to_string(dir.path().join(format!("{preset}_exact.svg"))).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 14);
}

#[test]
fn figure_spaced_writes_seven_curves() {
    check_figure("spaced", 20_000);
}

#[test]
fn figure_nearby_writes_seven_curves() {
    check_figure("nearby", 50_000);
}

#[test]
fn figure_without_back_projection() {
    let dir = tempfile::tempdir().unwrap();
    let o = symflow(&[
        "figure", "nearby", "--backprojection", "none", "--gamma", "0.1", "--steps", "1000",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(dir.path().join("nearby_none_m2s_a20.csv").exists());
    assert!(dir.path().join("nearby_none_twj2s.csv").exists());
}

#[test]
fn detsweep_grid_and_trailer() {
    let o = symflow(&["detsweep"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,det");
    let rows: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 201);
    assert!(rows[0].starts_with("0.0,"));
    assert!(rows[1].starts_with("0.1,"));
    assert!(rows[200].starts_with("20.0,"));
    let trailer = lines.last().unwrap();
    let count: usize = trailer
        .strip_prefix("# zero_crossings: ")
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(count >= 1);
}

#[test]
fn detsweep_single_column_is_constant() {
    let o = symflow(&["detsweep", "--m", "1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let dets: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(dets.len(), 201);
    assert!(dets.iter().all(|d| (d - dets[0]).abs() <= 1e-12 * dets[0].abs()));
    assert!(text.ends_with("# zero_crossings: 0 \n"));
}

#[test]
fn verify_passes_and_filters() {
    let o = symflow(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 7);

    let o = symflow(&["verify", "--only", "gradcheck"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("[PASS] gradcheck"));

    assert_eq!(symflow(&["verify", "--only", "nothing"]).status.code(), Some(1));
}

fn form1_with_flipped_sign(w: &Matrix, c: &Matrix, alpha: f64) -> symflow::Result<Matrix> {
    let mut out = rule_rhs(&RuleSpec::N2S, w, c)?.scale(1.0 + alpha);
    out.add_scaled(alpha, &m2s_subspace_factor(w, c)?);
    Ok(out)
}

#[test]
fn corrupted_rule_fails_verification() {
    let opts = VerifyOptions {
        form1: form1_with_flipped_sign,
        ..Default::default()
    };
    let mut out = Vec::new();
    let mut err = Vec::new();
    assert_eq!(verify_exit_code(&opts, &mut out, &mut err), EXIT_VERIFY);
    let err = String::from_utf8(err).unwrap();
    assert!(err.contains("arrangement-identity"), "{err}");
    assert!(String::from_utf8(out).unwrap().contains("[FAIL] arrangement-identity"));
}
