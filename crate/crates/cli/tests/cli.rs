use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wbarray::correlation::uniform_angle_grid;
use wbarray::persist::{read_map_csv, read_tensor, write_map_csv, write_tensor, MapCsv};
use wbarray::{Complex64, CorrMap, OperatorTensor};

const REFERENCE: &str = include_str!("../../../configs/reference.conf");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wbarray"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().expect("exit code")
}

/// Reference config with a short design run.
fn small_config(dir: &Path, batches: u64, every: u64) -> PathBuf {
    let text = REFERENCE
        .replace("batches = 250000", &format!("batches = {batches}"))
        .replace("checkpoint_every = 1000", &format!("checkpoint_every = {every}"));
    let p = dir.join(format!("k{batches}.conf"));
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn manifold_dims_follow_config_and_angles() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["manifold", "--out", "m.wbt", "--angles", "4"]);
    assert_eq!(read_tensor(d.path().join("m.wbt")).unwrap().dims(), &[32, 8, 4]);
    ok(d.path(), &["manifold", "--out", "full.wbt"]);
    assert_eq!(read_tensor(d.path().join("full.wbt")).unwrap().dims(), &[32, 8, 720]);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("m.wbt.json")).unwrap()).unwrap();
    assert_eq!(meta["angles"].as_array().unwrap().len(), 4);
    assert_eq!(meta["band"], "field");
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    assert_eq!(code(p, &["--config", "missing.conf", "manifold", "--out", "m.wbt"]), 2);
    fs::write(p.join("bad.conf"), REFERENCE.replace("beta1 = 0.3", "beta1 = 1.5")).unwrap();
    let out = run(p, &["--config", "bad.conf", "design", "--out", "o.wbt", "--log", "l.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta1"));
    assert_eq!(code(p, &["manifold"]), 2);
    assert_eq!(code(p, &["scf", "--manifold", "absent.wbt", "--out", "s.csv"]), 4);

    ok(p, &["manifold", "--out", "m.wbt", "--angles", "6"]);
    // A steering tensor is not an operator.
    assert_eq!(code(p, &["scf", "--manifold", "m.wbt", "--operator", "m.wbt", "--out", "s.csv"]), 3);
    fs::write(p.join("junk.wbt"), b"not a tensor").unwrap();
    assert_eq!(code(p, &["scf", "--manifold", "m.wbt", "--operator", "junk.wbt", "--out", "s.csv"]), 3);
    assert_eq!(code(p, &["corr", "--manifold", "m.wbt", "--theta", "4", "--out", "c.csv"]), 2);
    assert_eq!(code(p, &["corr", "--manifold", "m.wbt", "--theta", "0", "--tau", "0", "--out", "c.csv"]), 2);
    assert_eq!(code(p, &["scf", "--manifold", "m.wbt", "--out", "no/such/dir/s.csv"]), 4);
}

#[test]
fn zero_batches_writes_the_random_start() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), 0, 10);
    ok(d.path(), &["--config", cfg.to_str().unwrap(), "--seed", "5", "design", "--out", "op.wbt", "--log", "log.csv"]);
    let op = read_tensor(d.path().join("op.wbt")).unwrap();
    assert_eq!(&op, OperatorTensor::random(32, 8, 5).unwrap().tensor());
    assert_eq!(fs::read_to_string(d.path().join("log.csv")).unwrap(), "iteration,heldout_error,batch_error\n");
}

#[test]
fn design_is_reproducible_and_logs_each_checkpoint() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), 30, 10);
    let c = cfg.to_str().unwrap();
    ok(d.path(), &["--config", c, "design", "--out", "a.wbt", "--log", "a.csv"]);
    ok(d.path(), &["--config", c, "--threads", "2", "design", "--out", "b.wbt", "--log", "b.csv"]);
    ok(d.path(), &["--config", c, "--seed", "9", "design", "--out", "s.wbt", "--log", "s.csv"]);
    let a = fs::read(d.path().join("a.wbt")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.wbt")).unwrap());
    assert_ne!(a, fs::read(d.path().join("s.wbt")).unwrap());
    // The last checkpoint coincides with the final operator.
    assert_eq!(a, fs::read(d.path().join("a.wbt.ckpt")).unwrap());

    let log = fs::read_to_string(d.path().join("a.csv")).unwrap();
    let rows: Vec<&str> = log.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("30,"));
    let first: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    let last: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(last < first);
}

#[test]
fn identity_operator_reproduces_plain_scf() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["manifold", "--out", "m.wbt", "--angles", "24"]);
    write_tensor(p.join("id.wbt"), OperatorTensor::identity(32, 8).tensor()).unwrap();
    ok(p, &["scf", "--manifold", "m.wbt", "--out", "plain.csv"]);
    ok(p, &["scf", "--manifold", "m.wbt", "--operator", "id.wbt", "--out", "id.csv"]);
    assert_eq!(fs::read(p.join("plain.csv")).unwrap(), fs::read(p.join("id.csv")).unwrap());
    match read_map_csv(p.join("plain.csv")).unwrap() {
        MapCsv::Scf(m) => assert_eq!(m.len(), 24),
        other => panic!("expected an scf map, got {other:?}"),
    }
}

#[test]
fn narrow_band_scf_has_grating_lobes_and_wide_band_fewer() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["manifold", "--out", "n.wbt", "--angles", "180"]);
    ok(p, &["manifold", "--out", "w.wbt", "--angles", "180", "--band", "target"]);
    ok(p, &["scf", "--manifold", "n.wbt", "--normalized", "--out", "n.csv"]);
    ok(p, &["scf", "--manifold", "w.wbt", "--normalized", "--out", "w.csv"]);
    let worst = |f: &str| match read_map_csv(p.join(f)).unwrap() {
        MapCsv::Scf(m) => m.max_off_diagonal(5f64.to_radians()),
        _ => unreachable!(),
    };
    let (n, w) = (worst("n.csv"), worst("w.csv"));
    assert!(n > 0.9 && w < n, "narrow {n}, wide {w}");
}

#[test]
fn noiseless_correlation_peaks_at_the_source() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["manifold", "--out", "m.wbt"]);
    let theta = format!("{}", PI / 4.0);
    ok(p, &["corr", "--manifold", "m.wbt", "--theta", &theta, "--snr-db", "inf", "--out", "c.csv"]);
    let grid = uniform_angle_grid(720);
    let nearest = grid
        .iter()
        .copied()
        .min_by(|a, b| (a - PI / 4.0).abs().total_cmp(&(b - PI / 4.0).abs()))
        .unwrap();
    match read_map_csv(p.join("c.csv")).unwrap() {
        MapCsv::Corr(c) => {
            assert_eq!(c.angles().len(), 720);
            assert_eq!(c.peak_angle(), nearest);
        }
        _ => unreachable!(),
    }
    let psl = String::from_utf8(ok(p, &["psl", "--in", "c.csv"]).stdout).unwrap();
    let psl: f64 = psl.trim().parse().unwrap();
    assert!(psl < 0.0 && psl > -3.0, "{psl}");
}

#[test]
fn noise_follows_the_seed() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["manifold", "--out", "m.wbt", "--angles", "36"]);
    let args = |seed: &'static str, out: &'static str| {
        ["--seed", seed, "corr", "--manifold", "m.wbt", "--theta", "-2.5", "--snr-db", "0", "--out", out]
    };
    ok(p, &args("1", "a.csv"));
    ok(p, &args("1", "b.csv"));
    ok(p, &args("2", "c.csv"));
    let a = fs::read(p.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(p.join("b.csv")).unwrap());
    assert_ne!(a, fs::read(p.join("c.csv")).unwrap());
}

#[test]
fn psl_of_delta_and_dirichlet_maps() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let angles = uniform_angle_grid(360);
    let delta: Vec<Complex64> = (0..360).map(|i| Complex64::new(if i == 100 { 1.0 } else { 0.0 }, 0.0)).collect();
    write_map_csv(p.join("delta.csv"), &CorrMap::new(angles.clone(), 1.0, delta).unwrap()).unwrap();
    let out = String::from_utf8(ok(p, &["psl", "--in", "delta.csv"]).stdout).unwrap();
    assert_eq!(out.trim().parse::<f64>().unwrap(), wbarray::correlation::PSL_FLOOR_DB);

    // |sin(N x) / (N sin x)| for a 16-element half-wavelength array at broadside.
    let half: Vec<f64> = (1..720).map(|i| i as f64 * PI / 720.0).collect();
    let vals: Vec<Complex64> = half
        .iter()
        .map(|t| {
            let x = 0.5 * PI * t.cos();
            let v = if x.sin().abs() < 1e-15 { 1.0 } else { (16.0 * x).sin() / (16.0 * x.sin()) };
            Complex64::new(v, 0.0)
        })
        .collect();
    write_map_csv(p.join("ula.csv"), &CorrMap::new(half, 1.0, vals).unwrap()).unwrap();
    let out = String::from_utf8(ok(p, &["psl", "--in", "ula.csv", "--halfwidth-deg", "8"]).stdout).unwrap();
    let psl: f64 = out.trim().parse().unwrap();
    assert!((psl + 13.0).abs() < 0.5, "{psl}");
}
