use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use argus_cli::manifest::read_manifest;
use argus_cli::{Manifest, MANIFEST_FILE};

fn argus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_argus"))
        .args(args)
        .output()
        .expect("spawn argus")
}

fn ok(args: &[&str]) -> Output {
    let out = argus(args);
    assert!(
        out.status.success(),
        "argus {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails(args: &[&str], code: i32) -> String {
    let out = argus(args);
    assert_eq!(out.status.code(), Some(code), "argus {}", args.join(" "));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn trace_csv(rows: impl IntoIterator<Item = (u64, f64, f64)>) -> String {
    let mut out = String::from("frame_index,primary_angle_deg,secondary_angle_deg\n");
    for (f, p, q) in rows {
        out.push_str(&format!("{f},{p},{q}\n"));
    }
    out
}

fn record(id: &str) -> String {
    format!(r#"{{"id":"{id}","truth":1,"p_topk":[1,2,3,4,5],"s_topk":[2,1,3,4,5]}}"#)
}

#[test]
fn empty_log_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "empty.jsonl", "{\"num_classes\": 10}\n");
    let err = fails(&["arbitrate", "--log", s(&log), "--seed", "1", "--out", s(&dir.path().join("o"))], 2);
    assert!(err.contains("empty log"), "{err}");
    let blank = write(dir.path(), "blank.jsonl", "");
    let err = fails(&["arbitrate", "--log", s(&blank), "--seed", "1", "--out", s(&dir.path().join("o"))], 2);
    assert!(err.contains("missing header"), "{err}");
}

#[test]
fn ensemble_without_probs_names_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{{\"num_classes\": 10}}\n{}\n{}\n", record("first-item"), record("second-item"));
    let log = write(dir.path(), "log.jsonl", &text);
    let out = dir.path().join("o");
    let err = fails(&["arbitrate", "--log", s(&log), "--seed", "1", "--ensemble", "--out", s(&out)], 2);
    assert!(err.contains("first-item"), "{err}");
    assert!(!err.contains("second-item"), "{err}");
}

#[test]
fn missing_inputs_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(dir.path(), "t.csv", &trace_csv((0..40).map(|i| (i, 0.0, 0.0))));
    let out = dir.path().join("o");
    let missing = dir.path().join("nope.csv");
    let err = fails(&["sweep", "--trace", s(&trace), "--events", s(&missing), "--out", s(&out)], 2);
    assert!(err.contains("nope.csv"), "{err}");
    fails(&["arbitrate", "--log", s(&trace), "--out", s(&out)], 2);
    let angles = write(dir.path(), "a.csv", "angle_deg\n1.5\n");
    let err = fails(&["balance", "--angles", s(&angles), "--keep", "seeded", "--out", s(&out)], 2);
    assert!(err.contains("--seed"), "{err}");
}

#[test]
fn infeasible_spec_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let err = fails(
        &[
            "simulate-log", "--seed", "1", "--n", "100", "--fail1", "10", "--fail5", "20", "--disagree", "5",
            "--tp1", "2", "--tp5", "1", "--out", s(&out),
        ],
        3,
    );
    assert!(err.contains("fail5 <= fail1"), "{err}");
    fails(&["simulate-steering", "--seed", "1", "--smoothing", "1.5", "--out", s(&out)], 3);
}

#[test]
fn signal_on_agreeing_and_short_traces() {
    let dir = tempfile::tempdir().unwrap();
    let agree = write(dir.path(), "agree.csv", &trace_csv((0..50).map(|i| (i, i as f64 * 0.3, i as f64 * 0.3))));
    let out = dir.path().join("o");
    ok(&["signal", "--trace", s(&agree), "--out", s(&out)]);
    let text = fs::read_to_string(out.join("signal.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.ends_with(",0,false")), "{rows:?}");

    let short = write(dir.path(), "short.csv", &trace_csv((0..10).map(|i| (i, 1.0, 0.0))));
    fails(&["signal", "--trace", s(&short), "--out", s(&dir.path().join("o2"))], 2);
}

#[test]
fn perfect_separation_sweep() {
    let dir = tempfile::tempdir().unwrap();
    // Event at 300: disengagement period 150..=330 diverges, the rest agrees.
    let rows = (0..600).map(|i| if (150..=330).contains(&i) { (i, 3.0, -3.0) } else { (i, 1.0, 1.0) });
    let trace = write(dir.path(), "t.csv", &trace_csv(rows));
    let events = write(dir.path(), "e.csv", "frame_index,initiator\n300,human\n");
    let out = dir.path().join("o");
    ok(&["sweep", "--trace", s(&trace), "--events", s(&events), "--svg", "--out", s(&out)]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("roc_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["optimum"]["far"], 0.0);
    assert_eq!(summary["optimum"]["frr"], 0.0);
    assert_eq!(summary["disengagement_windows"], 6);
    assert!(fs::read_to_string(out.join("roc.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn simulated_ramps_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate-steering", "--seed", "4", "--duration", "20000", "--event-count", "4", "--out", s(&sim)]);
    let out = dir.path().join("sig");
    ok(&["signal", "--trace", s(&sim.join("trace.csv")), "--out", s(&out)]);
    let flagged: Vec<u64> = fs::read_to_string(out.join("signal.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.ends_with("true"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let events = fs::read_to_string(sim.join("events.csv")).unwrap();
    let events: Vec<u64> = events.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(events.len(), 4);
    for e in events {
        assert!(flagged.iter().any(|&f| f + 150 >= e && f < e), "no flag in the ramp before {e}");
    }
}

#[test]
fn simulate_log_from_spec_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"n":400,"num_classes":50,"fail1":100,"fail5":40,"disagree":90,"tp1":60,"tp5":25,"seed":3}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["simulate-log", "--spec", s(&spec), "--out", s(&a)]);
    ok(&["simulate-log", "--spec", s(&spec), "--out", s(&b)]);
    ok(&["simulate-log", "--spec", s(&spec), "--seed", "4", "--out", s(&c)]);
    let log = |d: &Path| fs::read(d.join("log.jsonl")).unwrap();
    assert_eq!(log(&a), log(&b));
    assert_ne!(log(&a), log(&c));
    let m: Manifest = read_manifest(&c.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seed, Some(4));

    let out = dir.path().join("arb");
    ok(&["arbitrate", "--log", s(&a.join("log.jsonl")), "--seed", "9", "--draws", "50", "--out", s(&out)]);
    let t2 = fs::read_to_string(out.join("table2.csv")).unwrap();
    assert_eq!(t2.lines().nth(1).unwrap(), "1,66.66666666666667,60,60,90,100");
}

#[test]
fn reference_log_with_probs_scores_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log");
    ok(&["simulate-log", "--reference", "--seed", "2", "--classes", "16", "--ensemble-fail1", "12200", "--ensemble-fail5", "3900", "--with-probs", "--out", s(&log)]);
    let out = dir.path().join("arb");
    ok(&["arbitrate", "--log", s(&log.join("log.jsonl")), "--seed", "1", "--draws", "20", "--ensemble", "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("table1.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("ensemble")).expect("ensemble row");
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(&cols[1..3], ["24.4", "7.8"]);
}

#[test]
fn preprocess_png_directory() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    for t in 0..12u8 {
        let img = image::RgbImage::from_pixel(32, 18, image::Rgb([10 * t, 10 * t, 10 * t]));
        img.save(frames.join(format!("f{t:03}.png"))).unwrap();
    }
    let out = dir.path().join("o");
    ok(&["preprocess", "--method", "m2", "--in", s(&frames), "--start-frame", "100", "--out", s(&out)]);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("net_inputs.json")).unwrap()).unwrap();
    assert_eq!(side["frames"], 2);
    assert_eq!(side["first_frame"], 110);
    let inputs = argus_cli::frames::decode_net_inputs(&fs::read(out.join("net_inputs.f32")).unwrap());
    // M2 channels: gaps of 10, 5 and 1 frames on a 10-per-frame ramp.
    for (c, gap) in [10.0, 5.0, 1.0].into_iter().enumerate() {
        let want = ((10.0 * gap / 255.0 + 1.0) / 2.0) as f32;
        assert!(inputs[0].index_axis(ndarray::Axis(2), c).iter().all(|&v| v == want));
    }
    fails(&["preprocess", "--method", "m1", "--in", s(&frames), "--out", s(&dir.path().join("o2"))], 2);
    fails(&["preprocess", "--method", "m9", "--in", s(&frames), "--out", s(&dir.path().join("o3"))], 2);
}

#[test]
fn sequential_flag_matches_default_and_inputs_are_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate-steering", "--seed", "8", "--duration", "30000", "--event-count", "5", "--out", s(&sim)]);
    let trace = sim.join("trace.csv");
    let before = fs::read(&trace).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "sweep".to_string(),
            "--trace".into(),
            s(&trace).into(),
            "--events".into(),
            s(&sim.join("events.csv")).into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let a_args = args(&a);
    ok(&a_args.iter().map(String::as_str).collect::<Vec<_>>());
    let mut b_args = args(&b);
    b_args.push("--sequential".into());
    ok(&b_args.iter().map(String::as_str).collect::<Vec<_>>());
    for f in ["roc.csv", "roc_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read(&trace).unwrap(), before);
}

#[test]
fn replay_detects_changed_inputs_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let angles = write(dir.path(), "a.csv", "angle_deg\n0.5\n0.7\n-3.2\n12\n0.1\n");
    let out = dir.path().join("o");
    ok(&["balance", "--angles", s(&angles), "--out", s(&out)]);
    let manifest = out.join(MANIFEST_FILE);
    let m = read_manifest(&manifest).unwrap();
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(
        m.outputs.iter().map(|o| o.path.as_str()).collect::<Vec<_>>(),
        ["selection.csv", "balance_summary.json"]
    );
    ok(&["replay", "--manifest", s(&manifest), "--out", s(&dir.path().join("r1"))]);

    // A tampered output digest is a mismatch.
    let mut bad = m.clone();
    bad.outputs[0].sha256 = "0".repeat(64);
    let bad_path = write(dir.path(), "bad.json", &serde_json::to_string(&bad).unwrap());
    let err = fails(&["replay", "--manifest", s(&bad_path), "--out", s(&dir.path().join("r2"))], 4);
    assert!(err.contains("selection.csv"), "{err}");

    // A changed input refuses to replay.
    fs::write(&angles, "angle_deg\n0.5\n").unwrap();
    let err = fails(&["replay", "--manifest", s(&manifest), "--out", s(&dir.path().join("r3"))], 2);
    assert!(err.contains("a.csv"), "{err}");
}
