use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qpulse_sim::config::{parse_config, Format};
use qpulse_sim::output::{read_table, write_table, Cell, Table};
use qpulse_sim::CliError;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpulse-sim"))
}

fn run_with(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("experiment.toml");
    fs::write(&path, config).unwrap();
    bin().arg(args[0]).arg("--config").arg(&path).args(&args[1..]).output().unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

const SWEEP_2X2: &str = r#"
name = "tiny"
[pulse]
protocol = "arp"
theta = "2 pi"
tau0 = "100 fs"
alpha_norm = 1.0
[numerics]
n_samples = 4096
[sweep]
[[sweep.axis]]
name = "theta"
min = 1.0
max = 3.0
count = 2
[[sweep.axis]]
name = "alpha"
min = -2.0
max = 2.0
count = 2
"#;

#[test]
fn documented_config_examples() {
    let c =
        parse_config("[pulse]\nprotocol = \"arp\"\ntheta = \"5 pi\"\ntau0 = \"100 fs\"\nalpha_norm = 0.8\n")
            .unwrap();
    assert_eq!((c.pulse.theta, c.pulse.tau0), (5.0 * PI, 1e-13));
    assert!((c.pulse.alpha / (0.8 * 1e-26) - 1.0).abs() < 1e-15);

    let c = parse_config(
        "[pulse]\nprotocol = \"rabi\"\ntheta = \"1 pi\"\ntau0 = \"100 fs\"\n[emitter]\ngamma = \"1/1ns\"\ngamma_ph = \"1/10ns\"\n",
    )
    .unwrap();
    assert_eq!((c.emitter.gamma, c.emitter.gamma_ph), (1e9, 1e8));

    let err = parse_config("[pulse]\nprotocol = \"\"\ntheta = \"1 pi\"\ntau0 = \"100 fs\"\n").unwrap_err();
    assert!(err.to_string().contains("rabi, arp, narp"), "{err}");
}

#[test]
fn config_errors_name_the_field() {
    let missing = parse_config("[pulse]\nprotocol = \"rabi\"\ntheta = \"1 pi\"\ntau0 = 100\n").unwrap_err();
    assert!(
        missing.to_string().contains("pulse.tau0") && missing.to_string().contains("missing unit"),
        "{missing}"
    );
    let unknown =
        parse_config("[pulse]\nprotocol = \"rabi\"\ntheta = \"1 pi\"\ntau0 = \"100 fs\"\ncolour = 1\n")
            .unwrap_err();
    assert!(unknown.to_string().contains("colour"), "{unknown}");
    let wrong =
        parse_config("[pulse]\nprotocol = \"rabi\"\ntheta = \"1 GHz\"\ntau0 = \"100 fs\"\n").unwrap_err();
    assert!(wrong.to_string().contains("GHz"), "{wrong}");
    assert_eq!(wrong.exit_code(), 1);
}

#[test]
fn table_files_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Table::new(&["a", "b", "flag"]).with_provenance(vec![("k".into(), "v w".into())]);
    let mut x = 0.1f64;
    for k in 0..200 {
        x = (x * 3.7 + 0.01).fract() * 10f64.powi(k % 40 - 20);
        t.push(vec![x.into(), (-x / 7.0).into(), (k % 3 == 0).into()]);
    }
    t.push(vec![f64::MIN_POSITIVE.into(), f64::MAX.into(), false.into()]);
    for format in [Format::Csv, Format::Json] {
        let back = read_table(&write_table(dir.path(), "t", &t, format).unwrap()).unwrap();
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.provenance, t.provenance);
        for (r, s) in back.rows.iter().zip(&t.rows) {
            for (a, b) in r.iter().zip(s) {
                match (a, b) {
                    (Cell::Num(a), Cell::Num(b)) => assert_eq!(a.to_bits(), b.to_bits()),
                    _ => assert_eq!(a, b),
                }
            }
        }
    }
}

#[test]
fn nan_cells_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Table::new(&["theta", "rho_ee"]);
    t.push(vec![1.0.into(), 0.5.into()]);
    t.push(vec![2.0.into(), f64::NAN.into()]);
    let err = write_table(dir.path(), "bad", &t, Format::Csv).unwrap_err();
    assert!(matches!(err, CliError::NanValue(_)));
    assert!(err.to_string().contains("row 2") && err.to_string().contains("rho_ee"), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("bad.csv").exists());
}

#[test]
fn two_by_two_sweep_writes_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_with(
        dir.path(),
        SWEEP_2X2,
        &["sweep", "--out", out.to_str().unwrap(), "--workers", "2", "--plot"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("tiny.csv")).unwrap();
    assert!(text.starts_with("# qpulse-sim v"));
    assert!(text.contains("# config_hash: "));
    let rows = data_lines(&text);
    assert_eq!(rows[0], "theta_over_pi,alpha_over_tau0_sq,rho_ee,converged");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("1.0,-2.0,"));
    assert!(out.join("tiny.svg").exists());
}

#[test]
fn sweep_files_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<String> = ["1", "3"]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("w{w}"));
            let o = run_with(
                dir.path(),
                SWEEP_2X2,
                &["sweep", "--out", out.to_str().unwrap(), "--workers", w, "--format", "json"],
            );
            assert!(o.status.success());
            fs::read_to_string(out.join("tiny.json")).unwrap()
        })
        .collect();
    assert_eq!(files[0], files[1]);
}

#[test]
fn fig2a_recipe_writes_trajectory_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["run", "--recipe", "fig2a", "--out"]).arg(dir.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_table(&dir.path().join("fig2a.csv")).unwrap();
    assert_eq!(t.columns, ["t_ps", "rho_ee", "re_rho_eg", "im_rho_eg"]);
    let rho = t.column("rho_ee").unwrap();
    assert!(*rho.last().unwrap() > 0.999);
    assert!(t.provenance.iter().any(|(k, _)| k == "tolerances"));
    assert!(dir.path().join("fig2a.svg").exists());
}

#[test]
fn pulse_command_writes_envelope_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["pulse", "--recipe", "fig2c", "--out"]).arg(dir.path()).output().unwrap();
    assert!(o.status.success());
    let env = read_table(&dir.path().join("fig2c_envelope.csv")).unwrap();
    let spec = read_table(&dir.path().join("fig2c_spectrum.csv")).unwrap();
    assert_eq!(env.columns[0], "t_ps");
    assert_eq!(spec.columns[0], "freq_offset_THz");
    // The notch zeroes the spectrum at the carrier.
    let f = spec.column("freq_offset_THz").unwrap();
    let a = spec.column("abs_amplitude").unwrap();
    let k = f.iter().position(|&x| x == 0.0).unwrap();
    assert!(a[k] < 1e-12 * a.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn exit_codes_and_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), "[pulse]\nprotocol = \"rabi\"\ntheta = \"1 pi\"\ntau0 = 100\n", &["evolve"]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 1);

    // Too few frequency samples across the line for a fit.
    let narrow = r#"
[pulse]
protocol = "rabi"
theta = "1 pi"
tau0 = "100 fs"
[emitter]
gamma = "1/1ns"
[spectrum]
freq_min = "-20 GHz"
freq_max = "20 GHz"
freq_count = 11
t_min = "1 ps"
t_max = "2 ps"
t_count = 2
"#;
    let out = dir.path().join("o");
    let o = run_with(dir.path(), narrow, &["spectrum", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "numerical");

    let o = bin().args(["run", "--recipe", "fig99"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_subcommand_passes() {
    let o = bin().args(["validate", "--workers", "2"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 6);
}
