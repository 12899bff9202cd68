use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use trapdamp::io::{read_impedance_csv, sha256_hex, RunManifest, MANIFEST_FILE};

const GRID: &str = "200e6,220e6,401";

fn trapdamp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trapdamp")).args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn missing_config_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = trapdamp(&["impedance", "--config", "/nonexistent/run.json"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error code="), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn malformed_grid_and_unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = trapdamp(&["impedance", "--grid", "2e8,1e8,10"], &tmp.path().join("a"));
    assert_eq!(o.status.code(), Some(2));

    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{ "circuit": { "c_trap_pf": 10 } }"#).unwrap();
    let o = trapdamp(&["impedance", "--config", cfg.to_str().unwrap()], &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(trapdamp(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(trapdamp(&["invert"], tmp.path()).status.code(), Some(1));
}

#[test]
fn transmission_inverts_back_to_the_impedance() {
    let tmp = tempfile::tempdir().unwrap();
    let fwd = tmp.path().join("fwd");
    let o = trapdamp(&["s21", "--grid", GRID, "--switch", "off"], &fwd);
    assert!(o.status.success(), "{}", stderr(&o));

    let back = tmp.path().join("back");
    let input = fwd.join("s21_off.csv");
    let o = trapdamp(&["invert", "--input", input.to_str().unwrap()], &back);
    assert!(o.status.success(), "{}", stderr(&o));

    let truth = read_impedance_csv(fs::read(fwd.join("impedance_off.csv")).unwrap().as_slice()).unwrap();
    let got = read_impedance_csv(fs::read(back.join("impedance.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(truth.points().len(), 401);
    for ((f, z), (g, y)) in truth.points().iter().zip(got.points()) {
        assert_eq!(f, g);
        assert!((z - y).norm() <= 1e-9 * z.norm(), "{f}: {z} vs {y}");
    }
    assert_eq!(manifest(&back).inputs["details"]["input_sha256"], sha256_hex(&fs::read(&input).unwrap()));
}

#[test]
fn manifest_lists_every_output_with_its_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("imp");
    let o = trapdamp(&["impedance"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m.command, "impedance");
    let names: Vec<&str> = m.outputs.iter().map(|e| e.file.as_str()).collect();
    for f in ["impedance_off.csv", "impedance_on.csv", "resonance_off.json", "resonance_on.json"] {
        assert!(names.contains(&f), "{f} not in {names:?}");
    }
    for e in &m.outputs {
        let bytes = fs::read(out.join(&e.file)).unwrap();
        assert_eq!(bytes.len(), e.bytes);
        assert_eq!(sha256_hex(&bytes), e.sha256);
    }
    assert_eq!(fs::read_dir(&out).unwrap().count(), m.outputs.len() + 1);
}

#[test]
fn seeded_runs_repeat_exactly_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{ "lineshape": { "trajectories": 200, "gamma_z_over_2pi_hz": [1.0, 0.05] }, "seed": 7 }"#,
    )
    .unwrap();
    let run = |dir: &str, threads: &str| {
        let out = tmp.path().join(dir);
        let o = Command::new(env!("CARGO_BIN_EXE_trapdamp"))
            .args(["lineshape", "--config", cfg.to_str().unwrap(), "--out"])
            .arg(&out)
            .env(trapdamp::cli::THREADS_ENV, threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "3"));
    let ma = manifest(&a);
    assert_eq!(ma.seed, 7);
    assert_eq!(ma.outputs.len(), 5);
    for e in &ma.outputs {
        assert_eq!(fs::read(a.join(&e.file)).unwrap(), fs::read(b.join(&e.file)).unwrap(), "{}", e.file);
    }
    assert_eq!(fs::read(a.join(MANIFEST_FILE)).unwrap(), fs::read(b.join(MANIFEST_FILE)).unwrap());
}

#[test]
fn scan_and_fit_hemt_write_their_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let scan = tmp.path().join("scan");
    let o = trapdamp(&["scan-ctuning"], &scan);
    assert!(o.status.success(), "{}", stderr(&o));
    let rec: serde_json::Value = serde_json::from_slice(&fs::read(scan.join("recommendation.json")).unwrap()).unwrap();
    assert_eq!(rec["satisfiable"], true);
    let c = rec["recommended_c_tuning_pf"].as_f64().unwrap();
    assert!(c > 1.0 && c < 200.0, "{c}");

    let fit = tmp.path().join("fit");
    let o = trapdamp(&["fit-hemt"], &fit);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: serde_json::Value = serde_json::from_slice(&fs::read(fit.join("fit.json")).unwrap()).unwrap();
    assert_eq!(result["converged"], true);
    for key in ["r_off_ohm", "r_on_ohm", "c_ds_f", "residual"] {
        assert!(result[key].as_f64().unwrap().is_finite(), "{key}");
    }

    // the synthetic measurements feed back in through --input
    let refit = tmp.path().join("refit");
    let input = fit.join("measurements.csv");
    let o = trapdamp(&["fit-hemt", "--input", input.to_str().unwrap()], &refit);
    assert!(o.status.success(), "{}", stderr(&o));
    // the CSV stores pF and kΩ, so only the last digits may move
    let again: serde_json::Value = serde_json::from_slice(&fs::read(refit.join("fit.json")).unwrap()).unwrap();
    for key in ["r_off_ohm", "r_on_ohm", "c_ds_f"] {
        let (a, b) = (result[key].as_f64().unwrap(), again[key].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-9 * a.abs(), "{key}: {a} vs {b}");
    }
}
