use std::path::Path;
use std::process::{Command, Output};

use periso_cli::{run, Experiment, ExperimentConfig};

fn periso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_periso"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    let body = &text[text.find('\n').unwrap() + 1..];
    csv::Reader::from_reader(body.as_bytes())
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    reader(text)
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn column(text: &str, name: &str) -> usize {
    reader(text)
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .unwrap()
}

#[test]
fn default_kernel_certificate_passes() {
    let out = periso(&["kernel_cert"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches(": PASS").count(), 4, "{text}");
}

#[test]
fn truncated_kernel_fails_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.cfg", "kernel_order = 0\n");
    let out = periso(&["kernel_cert", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("poisson_two_form: FAIL"));
    assert!(text.contains("sup_deviation: PASS"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("a.cfg", "dimension = 5\n"),
        ("b.cfg", "family = perturbed:Q\n"),
        ("c.cfg", "experiment = limit_check\n"),
        ("d.cfg", "rho_or_eps_values = 0.5\n"),
    ] {
        let cfg = write_config(dir.path(), name, text);
        let sub = if name == "d.cfg" {
            "limit_check"
        } else {
            "perimeter_sweep"
        };
        let out = periso(&[sub, "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
    assert_eq!(
        periso(&["perimeter_sweep", "--config", "/nonexistent.cfg"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        periso(&["stability_sweep", "--samples", "10"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn empty_t_values_give_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.cfg", "t_values =\n");
    let out_path = dir.path().join("e.csv");
    let out = periso(&[
        "perimeter_sweep",
        "--config",
        &cfg,
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_path).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(
        csv.starts_with("# periso perimeter_sweep schema v1\nconfig_hash,seed,resolution,samples,")
    );
}

#[test]
fn half_space_sweep_shows_the_slack_as_margin() {
    let out = periso(&["perimeter_sweep"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let row = &data_rows(&csv)[0];
    let margin: f64 = row[column(&csv, "margin_robust")].parse().unwrap();
    // 6e-9 · √2 ≈ 8.485e-9, up to quadrature rounding.
    assert!((margin - 6e-9 * 2f64.sqrt()).abs() < 1e-13, "{margin:e}");
}

#[test]
fn perturbed_sweep_increases_and_matches_fine_reference() {
    let cfg = ExperimentConfig::parse(
        "family = perturbed:B\nt_values = 0, 0.1, 0.2, 0.3, 0.4, 0.5\nfiber_samples = 0\n",
        Some(Experiment::PerimeterSweep),
    )
    .unwrap();
    let outcome = run(&cfg).unwrap();
    assert!(outcome.passed, "{:?}", outcome.failures);
    let mut fine = cfg.clone();
    fine.resolution = 1024;
    let reference = run(&fine).unwrap().output;

    let (lhs, tol) = (
        column(&outcome.output, "lhs"),
        column(&outcome.output, "mesh_tolerance"),
    );
    let rows = data_rows(&outcome.output);
    let ref_rows = data_rows(&reference);
    let values: Vec<f64> = rows.iter().map(|r| r[lhs].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    for (row, fine_row) in rows.iter().zip(&ref_rows) {
        let a: f64 = row[lhs].parse().unwrap();
        let b: f64 = fine_row[lhs].parse().unwrap();
        let t: f64 = row[tol].parse().unwrap();
        assert!((a - b).abs() <= t + 1e-12, "{a} vs {b} (tolerance {t})");
    }
}

#[test]
fn output_is_reproducible_and_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.cfg",
        "experiment = stability_sweep\nfamily = perturbed:A\nt_values = 0.3\nrho_or_eps_values = 0, 0.95\nsamples = 50000\nseed = 12\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, extra) in [(&a, None), (&b, None), (&c, Some("13"))] {
        let mut args = vec![
            "stability_sweep",
            "--config",
            &cfg,
            "--out",
            path.to_str().unwrap(),
        ];
        if let Some(seed) = extra {
            args.extend(["--seed", seed]);
        }
        assert_eq!(periso(&args).status.code(), Some(0));
    }
    let (a, b, c) = (
        std::fs::read(a).unwrap(),
        std::fs::read(b).unwrap(),
        std::fs::read_to_string(c).unwrap(),
    );
    assert_eq!(a, b);
    let a = String::from_utf8(a).unwrap();
    assert_ne!(a, c);
    for row in data_rows(&a) {
        assert_eq!(row[0].len(), 16);
        assert_eq!(row[1], "12");
        assert_eq!(row[3], "50000");
    }
    assert_eq!(data_rows(&c)[0][1], "13");
    assert_ne!(data_rows(&a)[0][0], data_rows(&c)[0][0]);
}

#[test]
fn half_space_row_at_zero_correlation_is_a_quarter() {
    let cfg = ExperimentConfig::parse(
        "rho_or_eps_values = 0\nsamples = 200000",
        Some(Experiment::StabilitySweep),
    )
    .unwrap();
    let out = run(&cfg).unwrap().output;
    let row = &data_rows(&out)[0];
    let p: f64 = row[column(&out, "probability")].parse().unwrap();
    let se: f64 = row[column(&out, "std_error")].parse().unwrap();
    assert!((p - 0.25).abs() < 3.0 * se);
    let oracle: f64 = row[column(&out, "oracle_probability")].parse().unwrap();
    assert!((oracle - 0.25).abs() < 1e-8);
}

#[test]
fn kebab_case_subcommands_are_accepted() {
    assert_eq!(periso(&["kernel-cert"]).status.code(), Some(0));
}
