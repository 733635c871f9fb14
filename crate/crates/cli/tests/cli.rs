use std::path::Path;
use std::process::Command;

use deblur_core::bench::{parse_kernel, synthetic_image};
use tempfile::tempdir;

fn deblur() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deblur"))
}

fn run(args: &[&str]) -> std::process::Output {
    deblur().args(args).output().expect("spawn deblur")
}

fn write_pgm(path: &Path, size: usize) {
    let img = synthetic_image("texture", size, size).unwrap();
    let p = img.pixels();
    let mut bytes = format!("P5\n{size} {size}\n255\n").into_bytes();
    bytes.extend(p.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    std::fs::write(path, bytes).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn make_kernel_writes_unit_sum_psf() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("k.txt");
    let o = run(&["make-kernel", "--spec", "kernel2", "--output", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let psf = parse_kernel(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((psf.sum() - 1.0).abs() < 1e-12);
    assert_eq!(psf.dim(), (10, 10));
}

#[test]
fn blur_noise_nonblind_round() {
    let dir = tempdir().unwrap();
    let sharp = dir.path().join("sharp.pgm");
    let blurred = dir.path().join("blurred.pgm");
    let noisy = dir.path().join("noisy.png");
    let restored = dir.path().join("restored.pgm");
    let kernel = dir.path().join("k.txt");
    write_pgm(&sharp, 48);
    assert!(run(&["make-kernel", "--spec", "gaussian:1.5", "--output", s(&kernel)]).status.success());
    assert!(run(&["blur", "--input", s(&sharp), "--output", s(&blurred), "--kernel", s(&kernel)]).status.success());
    assert!(run(&["noise", "--input", s(&blurred), "--output", s(&noisy), "--snr", "40", "--seed", "3"]).status.success());
    let o = run(&["deblur", "nonblind", "--input", s(&blurred), "--output", s(&restored), "--kernel", s(&kernel), "--max-iters", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let img = image::open(&restored).unwrap().to_luma8();
    assert_eq!(img.dimensions(), (48, 48));
    assert_eq!(image::open(&noisy).unwrap().to_luma8().dimensions(), (48, 48));
}

#[test]
fn blind_writes_outputs() {
    let dir = tempdir().unwrap();
    let blurred = dir.path().join("b.pgm");
    let sharp = dir.path().join("s.pgm");
    write_pgm(&sharp, 40);
    assert!(run(&["blur", "--input", s(&sharp), "--output", s(&blurred), "--spec", "gaussian:1.5"]).status.success());
    let out = dir.path().join("r.png");
    let psf = dir.path().join("psf.txt");
    let trace = dir.path().join("trace.csv");
    let o = run(&[
        "deblur", "blind", "--input", s(&blurred), "--output", s(&out), "--psf-out", s(&psf), "--trace", s(&trace),
        "--max-iters", "1", "--sigmas", "0.5:2:0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k = parse_kernel(&std::fs::read_to_string(&psf).unwrap()).unwrap();
    assert!((k.sum() - 1.0).abs() < 1e-9);
    let t = std::fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("iter,gamma,fidelity,objective"));
    assert_eq!(t.lines().count(), 1 + 7);
}

#[test]
fn init_kernel_prints_json() {
    let dir = tempdir().unwrap();
    let sharp = dir.path().join("s.pgm");
    let blurred = dir.path().join("b.pgm");
    write_pgm(&sharp, 96);
    assert!(run(&["blur", "--input", s(&sharp), "--output", s(&blurred), "--spec", "gaussian:2.0"]).status.success());
    let o = run(&["init-kernel", "--input", s(&blurred)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let alpha: Vec<f64> = serde_json::from_value(v["alpha"].clone()).unwrap();
    assert_eq!(alpha.len(), 8);
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn bench_is_byte_identical() {
    let dir = tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec![
            "bench".to_string(), "--images".into(), "rings".into(), "--size".into(), "32".into(), "--kernels".into(),
            "kernel2".into(), "--snr".into(), "inf,30".into(), "--seed".into(), "7".into(), "--max-iters".into(),
            "1".into(), "--report".into(), p.to_str().unwrap().into(),
        ]
    };
    assert!(deblur().args(args(&a)).status().unwrap().success());
    assert!(deblur().args(args(&b)).status().unwrap().success());
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let missing = dir.path().join("nope.pgm");
    let out = dir.path().join("o.pgm");
    assert_eq!(run(&["noise", "--input", s(&missing), "--output", s(&out), "--snr", "30"]).status.code(), Some(2));
    assert_eq!(run(&["make-kernel", "--spec", "bogus", "--output", s(&out)]).status.code(), Some(2));
    let bad_cfg = dir.path().join("c.toml");
    std::fs::write(&bad_cfg, "no_such_key = 1\n").unwrap();
    let sharp = dir.path().join("s.pgm");
    write_pgm(&sharp, 32);
    let o = run(&["deblur", "blind", "--input", s(&sharp), "--output", s(&out), "--config", s(&bad_cfg)]);
    assert_eq!(o.status.code(), Some(2));
    // clap usage errors also exit with 2
    assert_eq!(run(&["deblur"]).status.code(), Some(2));
}

#[test]
fn config_file_is_applied() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "delta = 0.05\nmax_iters = 1\nsigmas = [0.5, 1.0, 1.5]\n").unwrap();
    let sharp = dir.path().join("s.pgm");
    let out = dir.path().join("o.pgm");
    let trace = dir.path().join("t.csv");
    write_pgm(&sharp, 32);
    let o = run(&["deblur", "blind", "--input", s(&sharp), "--output", s(&out), "--config", s(&cfg), "--trace", s(&trace)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 1 + 7);
}
