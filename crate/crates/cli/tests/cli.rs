use rsfringe::attack::Capture;
use rsfringe::detector::{Detector, DetectorVerdict, StubFringeDetector};
use rsfringe::io::{load_image, quantize, save_image, synth_face, Encoding};
use rsfringe::{PerturbationParams, PulseParams, SensorConfig};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rsfringe");
const ADAPTER: &str = env!("CARGO_BIN_EXE_rsfringe-stub-adapter");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: [&str; 4] = ["--rows", "240", "--cols", "320"];
const GRID: [&str; 8] = ["--te", "25", "--b-max", "6", "--s-max", "6", "--alpha-max", "0"];

fn attack_dos(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec!["attack-dos", "--out", out];
    args.extend(SMALL);
    args.extend(GRID);
    args.extend(extra);
    if !extra.contains(&"--stub-min-run") {
        args.extend(["--stub-min-run", "2"]);
    }
    run(&args)
}

#[test]
fn simulate_without_interline_delay_is_a_usage_error() {
    let out = run(&["simulate", "--period-us", "200"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--td"));
}

#[test]
fn simulate_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["simulate", "--rows", "96", "--cols", "64", "--seed", "3", "--td", "25", "--te", "250", "--period-us", "300", "--duty", "0.4", "--phase-us", "20", "--out", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let face = synth_face(3, 96, 64).unwrap();
    let pulse = PulseParams::new(300.0, 0.4, 20.0, 1.0, 0.0).unwrap();
    let adv = load_image(dir.path().join("synth-3.adv.pgm")).unwrap();
    for i in 0..96 {
        let gain = pulse.integrate_level(25.0 * i as f64, 250.0) / 250.0;
        for j in 0..64 {
            let expected = quantize(face.get(i, j, 0) * gain) as f64 / 255.0;
            assert_eq!(adv.get(i, j, 0), expected, "pixel ({i},{j})");
        }
    }
    let report = json(dir.path().join("synth-3.report.json"));
    assert_eq!(report["frequency_hz"], 1e6 / 300.0);
    assert_eq!(report["imperceptible"], true);
    assert_eq!(report["theta"]["b"], 4.8);
    assert_eq!(report["pattern"]["profile"].as_array().unwrap().len(), 96);
    assert!(dir.path().join("synth-3.pattern.pgm").exists());
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn simulate_warns_about_visible_flicker() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--rows", "64", "--cols", "64", "--td", "25", "--theta", "200,200,0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report = json(dir.path().join("synth-0.report.json"));
    assert_eq!(report["imperceptible"], false);
    assert!(report["warnings"][0].as_str().unwrap().contains("flickers"));
}

#[test]
fn dodging_against_the_same_face_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("x.pgm");
    save_image(&synth_face(1, 96, 96).unwrap(), &img, Encoding::Pnm).unwrap();
    let img = img.to_str().unwrap();
    let out = run(&["attack-dodge", "--image", img, "--other", img, "--delta", "0.1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("precondition"));
}

#[test]
fn search_without_success_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = attack_dos(dir.path(), &["--stub-min-run", "1000"]);
    assert_eq!(code(&out), 1);
    let report = json(dir.path().join("synth-0.dos.json"));
    assert_eq!(report["thetas"].as_array().unwrap().len(), 0);
    assert_eq!(report["evaluations"], 36);
    assert_eq!(report["partial"], false);
}

#[test]
fn oracle_failure_exits_three_and_keeps_the_partial_result() {
    let dir = tempfile::tempdir().unwrap();
    // request 1 is the clean precondition check, request 2 the first grid point
    let adapter = format!("{ADAPTER} --min-run 2 --fault remote-error --fault-after 2");
    let out = attack_dos(dir.path(), &["--adapter", &adapter, "--mode", "collect-all"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(dir.path().join("synth-0.dos.json"));
    assert_eq!(report["partial"], true);
    assert_eq!(report["evaluations"], 1);
    assert!(report["error"].as_str().unwrap().contains("model crashed"));
    assert!(dir.path().join("synth-0.dos.csv").exists());
}

#[test]
fn missing_adapter_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = attack_dos(dir.path(), &["--adapter", "/nonexistent/adapter"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn external_adapter_agrees_with_the_in_process_stub() {
    let base = tempfile::tempdir().unwrap();
    let (a, b) = (base.path().join("stub"), base.path().join("ext"));
    let stub = attack_dos(&a, &["--mode", "collect-all"]);
    let adapter = format!("{ADAPTER} --min-run 2");
    let ext = attack_dos(&b, &["--mode", "collect-all", "--adapter", &adapter, "--jobs", "3"]);
    assert_eq!(code(&stub), 0);
    assert_eq!(code(&ext), 0, "{}", String::from_utf8_lossy(&ext.stderr));
    let (ra, rb) = (json(a.join("synth-0.dos.json")), json(b.join("synth-0.dos.json")));
    assert!(!ra["thetas"].as_array().unwrap().is_empty());
    assert_eq!(ra["thetas"], rb["thetas"]);
    assert_eq!(ra["evaluations"], rb["evaluations"]);
    assert_eq!(json(b.join("run.json"))["resolved"]["oracle"]["kind"], "external");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let extra = ["--random-phase", "--iters", "2", "--seed", "5", "--mode", "collect-all", "--jobs", "4"];
    assert_eq!(code(&attack_dos(dir.path(), &extra)), 0);
    let first: Vec<Vec<u8>> = ["run.json", "synth-5.dos.json", "synth-5.dos.csv"]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        .collect();
    assert_eq!(code(&attack_dos(dir.path(), &extra)), 0);
    for (f, bytes) in ["run.json", "synth-5.dos.json", "synth-5.dos.csv"].iter().zip(first) {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), bytes, "{f} changed");
    }
}

#[test]
fn pulse_period_table_has_one_row_per_condition() {
    let dir = tempfile::tempdir().unwrap();
    let out = attack_dos(dir.path(), &["--pulse-periods", "1000,1200,...,2000"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("synth-0.periods.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "model,condition,n_b,n_a,rate");
    assert_eq!(lines.len(), 8);
    assert!(lines[1].starts_with("stub-fringe,normal,"));
    assert!(lines[7].starts_with("stub-fringe,2000us,"));
}

#[test]
fn sweep_labels_cover_tilts_and_distances() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["sweep", "--count", "2", "--rows", "240", "--cols", "320", "--te", "25", "--pulse-periods", "1000,2000", "--tilts", "0,45", "--distances", "18,36", "--out", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(dir.path().join("sweep.json"));
    let labels: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["condition"].as_str().unwrap()).collect();
    assert_eq!(labels.len(), 2 + 2 * 2 * 2);
    assert!(labels.contains(&"normal@36cm"));
    assert!(labels.contains(&"2000us@45deg@36cm"));

    let out = run(&["sweep", "--objective", "dodging", "--count", "2", "--rows", "96", "--cols", "96", "--pulse-periods", "1000", "--out", d]);
    assert_eq!(code(&out), 2, "dodging without --delta");
}

/// Writes adversarial captures for each `(b, s)` and returns their manifest entries.
fn adversarial_set(dir: &Path, fringes: &[(u32, u32)]) -> Vec<String> {
    let capture = Capture::new(SensorConfig::new(1.0, 1.0, 1.0, 1, 1).unwrap());
    let mut det = StubFringeDetector::new((0.4, 0.6), 0.5, 2);
    let mut entries = Vec::new();
    for (k, &(b, s)) in fringes.iter().enumerate() {
        let face = synth_face(k as u64, 240, 320).unwrap();
        let adv = capture.apply(&face, &PerturbationParams::new(b as f64, s as f64, 0.0).unwrap(), 0, 0).unwrap();
        let name = format!("adv-{b}-{s}.pgm");
        save_image(&adv, dir.join(&name), Encoding::Pnm).unwrap();
        if det.detect(&load_image(dir.join(&name)).unwrap()).unwrap() == DetectorVerdict::Absent {
            entries.push(format!(
                r#"{{"path": "{name}", "subject": "s{k}", "condition": {{"period_us": {}, "duty": {}}}}}"#,
                b + s,
                b as f64 / (b + s) as f64
            ));
        }
    }
    entries
}

fn defend_rate(dir: &Path, entries: &[String]) -> (usize, usize) {
    let manifest = dir.join("set.json");
    std::fs::write(&manifest, format!(r#"{{"entries": [{}]}}"#, entries.join(","))).unwrap();
    let out = run(&["defend", "--manifest", manifest.to_str().unwrap(), "--stub-min-run", "2", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(dir.join("defense.json"));
    doc["rows"].as_array().unwrap().iter().fold((0, 0), |(a, b), r| {
        (a + r["n_a"].as_u64().unwrap() as usize, b + r["n_b"].as_u64().unwrap() as usize)
    })
}

#[test]
fn defense_batch_repairs_thin_fringes_only() {
    let thin_dir = tempfile::tempdir().unwrap();
    let thin: Vec<(u32, u32)> = (1..=4).flat_map(|b| (1..=4).map(move |s| (b, s))).collect();
    let entries = adversarial_set(thin_dir.path(), &thin);
    assert!(entries.len() >= 5, "only {} thin captures are adversarial", entries.len());
    let (fixed, total) = defend_rate(thin_dir.path(), &entries);
    assert_eq!(fixed, total);

    let wide_dir = tempfile::tempdir().unwrap();
    let wide = [(40, 40), (50, 40), (40, 60), (60, 60), (50, 70)];
    let entries = adversarial_set(wide_dir.path(), &wide);
    assert!(!entries.is_empty());
    let (fixed, total) = defend_rate(wide_dir.path(), &entries);
    assert!((fixed as f64) < total as f64, "wide fringes repaired {fixed}/{total}");
}

#[test]
fn defense_batch_with_nothing_to_defend_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("empty.json");
    std::fs::write(&manifest, r#"{"entries": []}"#).unwrap();
    let out = run(&["defend", "--manifest", manifest.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn defend_single_image_reports_suppression() {
    let dir = tempfile::tempdir().unwrap();
    let capture = Capture::new(SensorConfig::new(1.0, 1.0, 1.0, 1, 1).unwrap());
    let adv = capture.apply(&synth_face(2, 240, 320).unwrap(), &PerturbationParams::new(3.0, 5.0, 0.0).unwrap(), 0, 0).unwrap();
    let path = dir.path().join("adv.pgm");
    save_image(&adv, &path, Encoding::Pnm).unwrap();
    let out = run(&["defend", "--image", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(dir.path().join("adv.defense.json"));
    assert_eq!(doc["f0_cpr"], 0.125);
    assert!(doc["suppression_db"].as_f64().unwrap() > 20.0);
    assert!(dir.path().join("adv.repaired.pgm").exists());
}
