use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use droptrack::io::{EvalReportFile, TrackReportFile};
use serde_json::json;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_droptrack"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn droptrack")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err_line(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    stderr.trim_end().to_string()
}

fn sim_config(dir: &Path, particles: usize, frames: u64, seed: u64) -> PathBuf {
    let cfg = json!({
        "num_particles": particles,
        "domain_radius": 400.0,
        "frame_count": frames,
        "fps": 30.0,
        "speed_mean": 2.0,
        "speed_std": 0.5,
        "persistence": 0.9,
        "repulsion_radius": 60.0,
        "repulsion_strength": 7.0,
        "jitter_std": 0.5,
        "conf_low": 0.6,
        "conf_high": 0.99,
        "p_miss": 0.0,
        "p_false_positive": 0.0,
        "seed": seed
    });
    let path = dir.join("sim.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn read_report<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn single_particle_stream_is_fully_detected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sim_config(d, 1, 300, 5);
    ok(
        d,
        &[
            "simulate",
            "--config",
            "sim.json",
            "--out",
            "det.jsonl",
            "--truth",
            "truth.csv",
        ],
    );
    ok(
        d,
        &[
            "track",
            "--in",
            "det.jsonl",
            "--expected-count",
            "1",
            "--out",
            "tracks.csv",
            "--report",
            "rep.json",
        ],
    );
    let rep: TrackReportFile = read_report(&d.join("rep.json"));
    assert_eq!(rep.fdr, 1.0);
    assert_eq!((rep.total_frames, rep.accepted_frames), (300, 300));
    assert!(rep.generated_at.is_none());

    let csv = fs::read_to_string(d.join("tracks.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("frame,track_id,x,y"));
    assert_eq!(csv.lines().count(), 301);
}

#[test]
fn ten_particle_run_has_no_identity_switches() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sim_config(d, 10, 3000, 11);
    ok(
        d,
        &[
            "simulate",
            "--config",
            "sim.json",
            "--out",
            "det.jsonl",
            "--truth",
            "truth.csv",
        ],
    );
    ok(
        d,
        &[
            "track",
            "--in",
            "det.jsonl",
            "--expected-count",
            "10",
            "--out",
            "tracks.csv",
            "--report",
            "rep.json",
        ],
    );
    let stdout = ok(
        d,
        &[
            "evaluate",
            "--tracks",
            "tracks.csv",
            "--truth",
            "truth.csv",
            "--report",
            "eval.json",
        ],
    );
    assert!(stdout.contains("id switches: 0"));
    let ev: EvalReportFile = read_report(&d.join("eval.json"));
    assert_eq!(ev.id_switches, 0);
    assert_eq!(ev.matched_frames, 3000);
    assert_eq!(ev.fdr, 1.0);
    assert!(ev.mean_localization_error < 1.0);
}

#[test]
fn over_detection_is_histogrammed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let b = |x: f64| json!({"cx": x, "cy": 0.0, "w": 4.0, "h": 4.0, "conf": 0.9});
    let lines = [
        json!({"frame": 0, "boxes": [b(0.0), b(50.0), b(100.0)]}),
        json!({"frame": 1, "boxes": [b(1.0), b(51.0), b(101.0), b(150.0)]}),
        json!({"frame": 2, "boxes": [b(2.0), b(52.0), b(102.0)]}),
    ];
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(d.join("det.jsonl"), text).unwrap();
    ok(
        d,
        &[
            "track",
            "--in",
            "det.jsonl",
            "--expected-count",
            "3",
            "--out",
            "t.csv",
            "--report",
            "r.json",
        ],
    );
    let rep: TrackReportFile = read_report(&d.join("r.json"));
    assert_eq!(rep.rejection_histogram.get(&4), Some(&1));
    assert_eq!(rep.rejected_frame_indices, vec![1]);
    assert_eq!(rep.accepted_frames, 2);
}

#[test]
fn malformed_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let good = r#"{"frame":0,"boxes":[{"cx":0,"cy":0,"w":1,"h":1,"conf":0.9}]}"#;
    fs::write(d.join("det.jsonl"), format!("{good}\n{{\"frame\": oops\n")).unwrap();
    let out = run(
        d,
        &[
            "track",
            "--in",
            "det.jsonl",
            "--expected-count",
            "1",
            "--out",
            "t.csv",
            "--report",
            "r.json",
        ],
    );
    let line = err_line(&out);
    assert!(line.starts_with("error[parse]: line 2"), "{line}");
    assert_eq!(out.status.code(), Some(1));
    let mut left: Vec<_> = fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    left.sort();
    assert_eq!(left, vec!["det.jsonl"]);
}

#[test]
fn out_of_order_frames_are_an_ordering_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("det.jsonl"),
        "{\"frame\":3,\"boxes\":[]}\n{\"frame\":2,\"boxes\":[]}\n",
    )
    .unwrap();
    let out = run(
        d,
        &[
            "track",
            "--in",
            "det.jsonl",
            "--expected-count",
            "1",
            "--out",
            "t.csv",
            "--report",
            "r.json",
        ],
    );
    assert!(err_line(&out).starts_with("error[ordering]:"));
    assert!(!d.join("t.csv").exists());
}

#[test]
fn usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["track", "--in", "x"]);
    assert!(err_line(&out).starts_with("error[usage]:"));
    assert_eq!(out.status.code(), Some(2));

    fs::write(
        d.join("bad.json"),
        r#"{"num_particles": 3, "colour": "red"}"#,
    )
    .unwrap();
    let out = run(
        d,
        &[
            "simulate", "--config", "bad.json", "--out", "a", "--truth", "b",
        ],
    );
    assert!(err_line(&out).starts_with("error[config]:"));

    let out = run(
        d,
        &[
            "evaluate",
            "--tracks",
            "missing.csv",
            "--truth",
            "t.csv",
            "--report",
            "e.json",
        ],
    );
    assert!(err_line(&out).starts_with("error[io]:"));

    let out = run(
        d,
        &[
            "track",
            "--in",
            "x",
            "--expected-count",
            "0",
            "--out",
            "a",
            "--report",
            "b",
        ],
    );
    assert!(err_line(&out).starts_with("error[config]:"));
}

#[test]
fn stamp_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("det.jsonl"),
        "{\"frame\":0,\"boxes\":[{\"cx\":1,\"cy\":1,\"w\":1,\"h\":1,\"conf\":1}]}\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "track",
            "--in",
            "det.jsonl",
            "--expected-count",
            "1",
            "--out",
            "t.csv",
            "--report",
            "r.json",
            "--stamp",
        ],
    );
    let rep: TrackReportFile = read_report(&d.join("r.json"));
    assert!(rep.generated_at.unwrap() > 1_600_000_000);
}

#[test]
fn analyze_writes_map_and_flow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("frame,track_id,x,y\n");
    for f in 0..11 {
        csv += &format!("{f},0,{},10\n", 5 * f);
        csv += &format!("{f},1,50,{}\n", 2 * f);
    }
    fs::write(d.join("tracks.csv"), csv).unwrap();
    let stdout = ok(
        d,
        &[
            "analyze",
            "--tracks",
            "tracks.csv",
            "--fps",
            "30",
            "--speed-map",
            "map.csv",
            "--grid",
            "5x2",
            "--flow",
            "flow.svg",
            "--bounds",
            "0,0,50,20",
        ],
    );
    assert!(stdout.contains("samples outside bounds: 0"));
    let map = fs::read_to_string(d.join("map.csv")).unwrap();
    let rows: Vec<&str> = map.lines().collect();
    assert_eq!(rows[0], "row,col,mean_speed,count");
    assert_eq!(rows.len(), 11);
    let total: u64 = rows[1..]
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 20);
    assert!(map.contains(",150.0,"), "{map}");

    let svg = fs::read_to_string(d.join("flow.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("<circle").count(), 2);
}

#[test]
fn import_yolo_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let frames = d.join("labels");
    fs::create_dir(&frames).unwrap();
    fs::write(frames.join("clip_0.txt"), "0 0.5 0.5 0.01 0.01 0.97\n").unwrap();
    fs::write(frames.join("clip_2.txt"), "0 0.25 0.75 0.01 0.01 0.80\n").unwrap();
    ok(
        d,
        &[
            "import-yolo",
            "--dir",
            "labels",
            "--width",
            "1280",
            "--height",
            "720",
            "--out",
            "det.jsonl",
        ],
    );
    let text = fs::read_to_string(d.join("det.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["boxes"][0]["cx"], 640.0);
    assert_eq!(lines[0]["boxes"][0]["cy"], 360.0);
    assert_eq!(lines[1]["boxes"].as_array().unwrap().len(), 0);
    assert_eq!(lines[2]["frame"], 2);

    fs::write(frames.join("clip_3.txt"), "0 0.5 0.5\n").unwrap();
    let out = run(
        d,
        &[
            "import-yolo",
            "--dir",
            "labels",
            "--width",
            "1280",
            "--height",
            "720",
            "--out",
            "again.jsonl",
        ],
    );
    let line = err_line(&out);
    assert!(
        line.starts_with("error[parse]:") && line.contains("clip_3.txt:1"),
        "{line}"
    );
    assert!(!d.join("again.jsonl").exists());
}
