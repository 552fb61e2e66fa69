use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qudit_slm::calibration::{GreyLevelLut, JonesParams, MeasurementSet};
use qudit_slm::harness::Provenance;
use qudit_slm::propagation::{local_maxima, ScanProfile};
use qudit_slm::qudit::{decode_pgm, MultiSlitAperture};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qudit-slm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Smooth path through parameter space on which all four coefficients vary.
fn smooth_path(n: usize) -> Vec<(u8, JonesParams)> {
    (0..n)
        .map(|i| {
            let t = i as f64 / (n.max(2) - 1) as f64;
            let (a, b, c) = (0.45 + 0.6 * t, 0.3 + 0.9 * t, 0.8 - 1.1 * t);
            let p = JonesParams::new(
                a.cos() * b.cos(),
                a.cos() * b.sin(),
                a.sin() * c.cos(),
                a.sin() * c.sin(),
            );
            (i as u8, p)
        })
        .collect()
}

/// Rotation LUT: X = cos θ, Z = sin θ, so T = sin²θ between H and V.
fn rotation_lut(dir: &Path, theta0: f64, theta1: f64) -> PathBuf {
    let path: Vec<(u8, [f64; 4])> = (0..=255u8)
        .map(|g| {
            let th = theta0 + (theta1 - theta0) * g as f64 / 255.0;
            (g, [th.cos(), 0.0, th.sin(), 0.0])
        })
        .collect();
    let lut = GreyLevelLut::from_params(&path).unwrap();
    let p = dir.join("rotation.json");
    std::fs::write(&p, lut.to_json()).unwrap();
    p
}

fn write_aperture(dir: &Path, percent: [f64; 4]) -> PathBuf {
    let ap = MultiSlitAperture::standard_four_slit(percent).unwrap();
    let p = dir.join("aperture.json");
    std::fs::write(&p, ap.to_json()).unwrap();
    p
}

#[test]
fn preset_fig3a_has_four_equal_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["preset", "paper-fig3a", "--out-dir", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = ScanProfile::from_csv_path(&dir.path().join("paper-fig3a.csv")).unwrap();
    let peaks = local_maxima(p.positions(), p.expected_rate(), 1e-9, 0.1);
    assert_eq!(peaks.len(), 4);
    for pk in &peaks {
        assert!((pk.height - 1.0).abs() < 1e-12);
    }
}

#[test]
fn preset_fig4b_peaks_at_center() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "preset",
        "paper-fig4b",
        "--noiseless",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = ScanProfile::from_csv_path(&dir.path().join("paper-fig4b.csv")).unwrap();
    assert!(p.counts().is_none());
    let (imax, _) = p
        .expected_rate()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(p.positions()[imax], 0.0);
}

#[test]
fn scan_rejects_oversized_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "scan",
        "--plane",
        "image",
        "--start-um",
        "-10",
        "--stop-um",
        "10",
        "--step-um",
        "50",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[E_CONFIG]"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn scan_from_spec_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = qudit_slm::harness::find_preset("paper-fig4c")
        .unwrap()
        .spec()
        .unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec.to_json()).unwrap();
    let o = run(&[
        "--seed",
        "3",
        "scan",
        "--spec",
        s(&spec_path),
        "--coherence-um",
        "inf",
        "--name",
        "run",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let prov = Provenance::from_json_path(&dir.path().join("run.provenance.json")).unwrap();
    assert_eq!(prov.seed, Some(3));
    let used = prov.spec.unwrap();
    assert!(used["geometry"]["coherence_um"].is_null());
    assert_eq!(used["noise"]["seed"], 3);
}

#[test]
fn scan_image_plane_with_geometry_file() {
    let dir = tempfile::tempdir().unwrap();
    let geo = r#"{"wavelength_nm":702,"focal_mm":150,"object_mm":225,"image_mm":450,"detector_slit_um":20,"coherence_um":null}"#;
    let gpath = dir.path().join("geo.json");
    std::fs::write(&gpath, geo).unwrap();
    let ap = write_aperture(dir.path(), [100.0, 75.0, 50.0, 25.0]);
    let o = run(&[
        "scan",
        "--plane",
        "image",
        "--geometry",
        s(&gpath),
        "--aperture",
        s(&ap),
        "--start-um",
        "-800",
        "--stop-um",
        "800",
        "--step-um",
        "1",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = ScanProfile::from_csv_path(&dir.path().join("scan.csv")).unwrap();
    let peaks = local_maxima(p.positions(), p.expected_rate(), 1e-9, 0.1);
    let xs: Vec<f64> = peaks.iter().map(|p| p.position).collect();
    assert_eq!(xs, [-624.0, -208.0, 208.0, 624.0]);
}

#[test]
fn calibrate_recovers_synthetic_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = smooth_path(64);
    let ms = MeasurementSet::synthesize(&path).unwrap();
    let input = dir.path().join("meas.csv");
    std::fs::write(&input, ms.to_csv()).unwrap();
    let output = dir.path().join("lut.json");
    let o = run(&["calibrate", "--input", s(&input), "--output", s(&output)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lut = GreyLevelLut::from_json_path(&output).unwrap();
    assert_eq!(lut.len(), 64);
    for (e, (g, p)) in lut.entries().iter().zip(&path) {
        assert_eq!(e.grey, *g);
        assert!(
            e.params().distance(p) < 1e-6,
            "grey {g}: {:?} vs {:?}",
            e.params(),
            p
        );
    }
    for f in [
        "lut.xyzw.svg",
        "lut.transmission.csv",
        "lut.transmission.svg",
        "lut.provenance.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let prov = Provenance::from_json_path(&dir.path().join("lut.provenance.json")).unwrap();
    let bytes = std::fs::read(&input).unwrap();
    assert_eq!(
        prov.inputs[0].sha256,
        qudit_slm::harness::sha256_hex(&bytes)
    );
}

#[test]
fn calibrate_missing_column_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "grey,i1,i2,i3,i4,i5,i7\n0,1,0,0.5,0.5,0.5,0.5\n").unwrap();
    let o = run(&[
        "calibrate",
        "--input",
        s(&input),
        "--output",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.starts_with("error[E_PARSE]") && err.contains("i6"),
        "{err}"
    );
}

#[test]
fn calibrate_empty_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "").unwrap();
    let o = run(&[
        "calibrate",
        "--input",
        s(&input),
        "--output",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[E_PARSE]"), "{}", stderr(&o));
}

#[test]
fn missing_input_is_an_io_error() {
    let o = run(&[
        "calibrate",
        "--input",
        "/nonexistent/m.csv",
        "--output",
        "/tmp/never.json",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[E_IO]"));
}

#[test]
fn render_standard_four_slit() {
    let dir = tempfile::tempdir().unwrap();
    let lut = rotation_lut(dir.path(), 0.0, std::f64::consts::FRAC_PI_2);
    let ap = write_aperture(dir.path(), [100.0; 4]);
    let pgm = dir.path().join("mask.pgm");
    let o = run(&[
        "render",
        "--aperture",
        s(&ap),
        "--lut",
        s(&lut),
        "--p1",
        "H",
        "--p2",
        "V",
        "--output",
        s(&pgm),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (w, h, grey) = decode_pgm(&std::fs::read(&pgm).unwrap()).unwrap();
    assert_eq!((w, h), (1024, 768));
    let row = &grey[..w];
    let lit: Vec<usize> = (0..w).filter(|&c| row[c] == 255).collect();
    assert_eq!(lit.len(), 16);
    let bands: Vec<&[usize]> = lit.chunks(4).collect();
    for b in &bands {
        assert_eq!(b[3] - b[0], 3);
    }
    for pair in bands.windows(2) {
        assert_eq!(pair[1][0] - pair[0][0], 8);
    }
    assert!((0..w).filter(|c| !lit.contains(c)).all(|c| row[c] == 0));
    // Every row is identical.
    assert!(grey.chunks(w).all(|r| r == row));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mask.json")).unwrap())
            .unwrap();
    assert_eq!(side["slits"].as_array().unwrap().len(), 4);
}

#[test]
fn render_closed_slit_uses_darkest_grey() {
    let dir = tempfile::tempdir().unwrap();
    let lut = rotation_lut(dir.path(), 0.2, 1.4);
    let ap = write_aperture(dir.path(), [100.0, 0.0, 100.0, 100.0]);
    let pgm = dir.path().join("mask.pgm");
    let o = run(&[
        "render",
        "--aperture",
        s(&ap),
        "--lut",
        s(&lut),
        "--p1",
        "H",
        "--p2",
        "V",
        "--output",
        s(&pgm),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mask.json")).unwrap())
            .unwrap();
    let slits = side["slits"].as_array().unwrap();
    assert_eq!(slits[1]["grey"], 0);
    assert_eq!(side["background_grey"], 0);
    assert_eq!(slits[0]["grey"], 255);
}

#[test]
fn render_reports_unachievable_slit() {
    let dir = tempfile::tempdir().unwrap();
    // T spans [sin²(π/8), sin²(π/4)] ≈ [0.146, 0.5]; 25 % of max is 0.125.
    let lut = rotation_lut(
        dir.path(),
        std::f64::consts::FRAC_PI_8,
        std::f64::consts::FRAC_PI_4,
    );
    let ap = write_aperture(dir.path(), [100.0, 75.0, 50.0, 25.0]);
    let o = run(&[
        "render",
        "--aperture",
        s(&ap),
        "--lut",
        s(&lut),
        "--p1",
        "H",
        "--p2",
        "V",
        "--output",
        s(&dir.path().join("m.pgm")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[E_T_UNACHIEVABLE]"), "{err}");
    assert!(err.contains("slit 3"), "{err}");
    assert!(!dir.path().join("m.pgm").exists());
}

#[test]
fn find_config_feeds_render() {
    let dir = tempfile::tempdir().unwrap();
    let lut = rotation_lut(dir.path(), 0.0, std::f64::consts::FRAC_PI_2);
    let cfg = dir.path().join("cfg.json");
    let o = run(&[
        "find-config",
        "--lut",
        s(&lut),
        "--min-contrast",
        "100",
        "--output",
        s(&cfg),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = String::from_utf8_lossy(&o.stdout);
    assert!(line.starts_with("p1="), "{line}");
    let ap = write_aperture(dir.path(), [100.0, 75.0, 50.0, 25.0]);
    let o = run(&[
        "render",
        "--aperture",
        s(&ap),
        "--lut",
        s(&lut),
        "--config",
        s(&cfg),
        "--output",
        s(&dir.path().join("m.pgm")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let flat = dir.path().join("flat.json");
    let path: Vec<(u8, [f64; 4])> = (0..4).map(|g| (g, [1.0, 0.0, 0.0, 0.0])).collect();
    std::fs::write(&flat, GreyLevelLut::from_params(&path).unwrap().to_json()).unwrap();
    let o = run(&["find-config", "--lut", s(&flat), "--min-contrast", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[E_CONFIG_NOT_FOUND]"));
}

#[test]
fn pixelated_scan_writes_mask() {
    let dir = tempfile::tempdir().unwrap();
    let lut = rotation_lut(dir.path(), 0.0, std::f64::consts::FRAC_PI_2);
    let o = run(&[
        "scan",
        "--plane",
        "focal",
        "--lut",
        s(&lut),
        "--p1",
        "H",
        "--p2",
        "V",
        "--pixelated",
        "--start-um",
        "-1000",
        "--stop-um",
        "1000",
        "--step-um",
        "5",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("scan.pgm").exists());
    let p = ScanProfile::from_csv_path(&dir.path().join("scan.csv")).unwrap();
    let (imax, _) = p
        .expected_rate()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(p.positions()[imax], 0.0);
}

#[test]
fn every_artifact_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let lut = rotation_lut(dir.path(), 0.0, std::f64::consts::FRAC_PI_2);
    let o = run(&[
        "--seed",
        "11",
        "scan",
        "--plane",
        "focal",
        "--lut",
        s(&lut),
        "--coherence-um",
        "300",
        "--peak-rate-cps",
        "50",
        "--name",
        "full",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let prov = Provenance::from_json_path(&dir.path().join("full.provenance.json")).unwrap();
    assert_eq!(
        prov.outputs,
        [
            "full.csv",
            "full.svg",
            "full.pgm",
            "full.mask.json",
            "full.provenance.json"
        ]
    );
    for f in &prov.outputs {
        let path = dir.path().join(f);
        let bytes = std::fs::read(&path).unwrap();
        match path.extension().and_then(|e| e.to_str()).unwrap() {
            "csv" => {
                let p = ScanProfile::from_csv_path(&path).unwrap();
                assert_eq!(p.to_csv().as_bytes(), bytes.as_slice());
            }
            "pgm" => {
                decode_pgm(&bytes).unwrap();
            }
            "json" => {
                serde_json::from_slice::<serde_json::Value>(&bytes).unwrap();
            }
            "svg" => assert!(bytes.starts_with(b"<svg")),
            other => panic!("unexpected artifact type {other}"),
        }
    }
}
