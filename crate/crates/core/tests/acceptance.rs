//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::io::{BufReader, Cursor};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use droptrack::io::{write_detections, DetectionReader, TrajectoryWriter};
use droptrack::{
    brute_force_assignment, compute_fdr, count_id_switches, displacement_bound_check, run,
    simulate, solve_assignment, speed_map, speeds, BoundingBox, Bounds, CostMatrix,
    FrameDetections, FrameUpdate, GateConfig, GroundTruthRecord, Point2D, SimConfig, Tracker,
    Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

fn ac1_assignment_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..1000 {
        let n = rng.random_range(1..=7usize);
        let entries: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..=1000.0)).collect();
        let m = CostMatrix::from_row_major(n, entries).map_err(|e| e.to_string())?;
        let fast = solve_assignment(&m);
        let slow = brute_force_assignment(&m).map_err(|e| e.to_string())?;
        if fast.total_cost != slow.total_cost {
            return Err(format!(
                "trial {trial} (n={n}): solver {} vs oracle {}",
                fast.total_cost, slow.total_cost
            ));
        }
    }
    let t = start.elapsed();
    check(
        t < Duration::from_secs(5),
        format!("1000 matrices agree exactly in {t:.2?}"),
        format!("took {t:.2?}"),
    )
}

fn ac2_fdr_table() -> Outcome {
    let rows: [(&str, u64, u64, f64); 13] = [
        ("Control", 7494, 7494, 1.0),
        ("Lights Off", 7883, 7884, 0.99987),
        ("Lights Low", 7961, 7962, 0.99987),
        ("Lights High", 7424, 7425, 0.99987),
        ("Two Droplet", 7978, 8031, 0.9934),
        ("Three Droplet", 8909, 9033, 0.98627),
        ("Res Mid", 9795, 9797, 0.9998),
        ("Res Low", 7801, 7805, 0.99949),
        ("Faraday", 8069, 8118, 0.99396),
        ("Corral White", 7581, 7692, 0.98557),
        ("3white", 12569, 12720, 0.98813),
        ("2white2black-10m", 18633, 18917, 0.98499),
        ("2white2black-20m", 36506, 36663, 0.99572),
    ];
    let mut worst = 0.0f64;
    for (name, det, total, printed) in rows {
        let fdr = compute_fdr(det, total).map_err(|e| e.to_string())?;
        let err = (fdr - printed).abs();
        if err > 5e-6 {
            return Err(format!("{name}: {fdr} vs {printed}"));
        }
        worst = worst.max(err);
    }
    Ok(format!("13 rows within 5e-6 (worst {worst:.1e})"))
}

struct RunStats {
    min_margin: f64,
    switches: u64,
    rejected: u64,
    total: u64,
}

fn track_and_score(config: &SimConfig) -> Result<RunStats, String> {
    let (frames, truth) = simulate(config).map_err(|e| e.to_string())?;
    let gate =
        GateConfig::with_default_threshold(config.num_particles).map_err(|e| e.to_string())?;
    let report = run(&frames, gate).map_err(|e| e.to_string())?;
    let accepted: Vec<u64> = frames
        .iter()
        .map(|f| f.frame_index)
        .filter(|f| report.rejected_frame_indices.binary_search(f).is_err())
        .collect();
    if accepted.len() as u64 != report.fdr_report.accepted_frames {
        return Err("accepted frame bookkeeping disagrees".into());
    }
    for t in &report.trajectories {
        let frames_of: Vec<u64> = t.points.iter().map(|p| p.frame_index).collect();
        if frames_of != accepted {
            return Err(format!(
                "seed {}: track {} has {} points for {} accepted frames",
                config.seed,
                t.track_id,
                t.len(),
                accepted.len()
            ));
        }
    }
    let bound = displacement_bound_check(&truth, &accepted).map_err(|e| e.to_string())?;
    if !bound.holds {
        return Err(format!(
            "seed {}: displacement bound fails (margin {})",
            config.seed, bound.margin
        ));
    }
    let eval = count_id_switches(&truth, &report).map_err(|e| e.to_string())?;
    Ok(RunStats {
        min_margin: bound.margin,
        switches: eval.id_switches,
        rejected: report.fdr_report.rejected_frames,
        total: report.fdr_report.total_frames,
    })
}

fn ten_particle_sweep(p_miss: f64) -> Result<(Vec<RunStats>, Duration), String> {
    let start = Instant::now();
    let stats = (1..=20u64)
        .map(|seed| {
            track_and_score(&SimConfig {
                num_particles: 10,
                frame_count: 10_000,
                p_miss,
                seed,
                ..SimConfig::default()
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((stats, start.elapsed()))
}

fn ac3_ten_particles() -> Outcome {
    let (stats, t) = ten_particle_sweep(0.0)?;
    let switches: u64 = stats.iter().map(|s| s.switches).sum();
    let margin = stats
        .iter()
        .map(|s| s.min_margin)
        .fold(f64::INFINITY, f64::min);
    let rejected: u64 = stats.iter().map(|s| s.rejected).sum();
    check(
        switches == 0 && rejected == 0 && t < Duration::from_secs(30),
        format!("20 seeds x 10k frames, 0 id switches, bound margin >= {margin:.2} px, {t:.2?}"),
        format!("{switches} id switches, {rejected} rejected frames, {t:.2?}"),
    )
}

fn ac4_rejected_frames() -> Outcome {
    let (stats, t) = ten_particle_sweep(0.002)?;
    let switches: u64 = stats.iter().map(|s| s.switches).sum();
    let margin = stats
        .iter()
        .map(|s| s.min_margin)
        .fold(f64::INFINITY, f64::min);
    let rejected: u64 = stats.iter().map(|s| s.rejected).sum();
    let total: u64 = stats.iter().map(|s| s.total).sum();
    let rate = rejected as f64 / total as f64;
    check(
        switches == 0 && (0.01..=0.03).contains(&rate),
        format!(
            "{:.2}% frames rejected, bound holds across gaps (margin >= {margin:.2} px), 0 id switches, point counts match, {t:.2?}",
            100.0 * rate
        ),
        format!("{switches} id switches at {:.2}% rejected", 100.0 * rate),
    )
}

fn ac5_swap_control() -> Outcome {
    let a = Point2D::new(0.0, 0.0);
    let b = Point2D::new(100.0, 0.0);
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    for f in 0..10u64 {
        let (p0, p1) = if f < 5 { (a, b) } else { (b, a) };
        let boxes = [p0, p1]
            .map(|p| BoundingBox::new(p.x, p.y, 8.0, 8.0, 0.9).unwrap())
            .to_vec();
        frames.push(FrameDetections::new(f, boxes));
        truth.push(GroundTruthRecord {
            frame_index: f,
            particle_id: 0,
            position: p0,
        });
        truth.push(GroundTruthRecord {
            frame_index: f,
            particle_id: 1,
            position: p1,
        });
    }
    let all: Vec<u64> = (0..10).collect();
    let bound = displacement_bound_check(&truth, &all).map_err(|e| e.to_string())?;
    let report =
        run(&frames, GateConfig::with_default_threshold(2).unwrap()).map_err(|e| e.to_string())?;
    let eval = count_id_switches(&truth, &report).map_err(|e| e.to_string())?;
    check(
        eval.id_switches == 2 && !bound.holds,
        format!(
            "swap violates the bound (margin {}) and yields exactly 2 id switches",
            bound.margin
        ),
        format!(
            "id_switches = {}, bound holds = {}",
            eval.id_switches, bound.holds
        ),
    )
}

fn line_trajectory(frames: &[u64]) -> Trajectory {
    let mut t = Trajectory::new(0);
    for &f in frames {
        t.push(
            f,
            Point2D::new(10.0 + 3.0 * f as f64, 20.0 + 4.0 * f as f64),
        );
    }
    t
}

fn ac6_speed_analytics() -> Outcome {
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
    let full: Vec<u64> = (0..200).collect();
    let t = line_trajectory(&full);
    let s = speeds(&t, 30.0).map_err(|e| e.to_string())?;
    let worst = s.iter().map(|x| rel(x.speed, 150.0)).fold(0.0, f64::max);
    if s.len() != 199 || worst > 1e-9 {
        return Err(format!("constant speed off by {worst:e} relative"));
    }

    let every_other: Vec<u64> = full.iter().copied().step_by(2).collect();
    let sub = speeds(&line_trajectory(&every_other), 30.0).map_err(|e| e.to_string())?;
    let worst_sub = sub.iter().map(|x| rel(x.speed, 150.0)).fold(0.0, f64::max);
    if worst_sub > 1e-9 {
        return Err(format!("subsampled speed off by {worst_sub:e} relative"));
    }

    // a wandering path over a partly covering grid exercises overflow too
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut w = Trajectory::new(1);
    let mut p = Point2D::new(0.0, 0.0);
    for f in 0..5000u64 {
        w.push(f, p);
        p = p + Point2D::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
    }
    let bounds = Bounds::new(-80.0, -80.0, 80.0, 80.0).map_err(|e| e.to_string())?;
    let trajs = [t, w];
    let map = speed_map(&trajs, 30.0, 13, 7, bounds).map_err(|e| e.to_string())?;
    let mut binned = 0.0;
    let mut samples = 0u64;
    for tr in &trajs {
        for s in speeds(tr, 30.0).map_err(|e| e.to_string())? {
            samples += 1;
            if map.locate(s.position).is_some() {
                binned += s.speed;
            }
        }
    }
    let from_cells: f64 = map
        .cells
        .iter()
        .map(|c| c.mean_speed * c.sample_count as f64)
        .sum();
    let cons = rel(from_cells, binned);
    check(
        cons <= 1e-9 && map.binned_samples() + map.overflow == samples,
        format!(
            "150 px/s within {worst:.1e}, subsampled within {worst_sub:.1e}, map conserves within {cons:.1e} ({} overflow)",
            map.overflow
        ),
        format!("conservation error {cons:e}"),
    )
}

fn ac7_throughput() -> Outcome {
    let config = SimConfig {
        num_particles: 10,
        frame_count: 100_000,
        seed: 77,
        ..SimConfig::default()
    };
    let (frames, _) = simulate(&config).map_err(|e| e.to_string())?;
    let gate = GateConfig::with_default_threshold(10).unwrap();

    let mut tracker = Tracker::new(gate).map_err(|e| e.to_string())?;
    let start = Instant::now();
    for f in &frames {
        tracker.push(f).map_err(|e| e.to_string())?;
    }
    let core = start.elapsed();
    let accepted = tracker.fdr_report().accepted_frames;

    // full streaming path: parse lines, gate, associate, serialize rows
    let mut jsonl = Vec::new();
    write_detections(&mut jsonl, &frames).map_err(|e| e.to_string())?;
    drop(frames);
    let mut tracker = Tracker::new(gate).map_err(|e| e.to_string())?;
    let mut writer = TrajectoryWriter::new(std::io::sink()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    for frame in DetectionReader::new(BufReader::new(Cursor::new(&jsonl))) {
        let frame = frame.map_err(|e| e.to_string())?;
        if !matches!(
            tracker.push(&frame).map_err(|e| e.to_string())?,
            FrameUpdate::Rejected(_)
        ) {
            writer
                .write_tracks(tracker.tracks())
                .map_err(|e| e.to_string())?;
        }
    }
    let full = start.elapsed();
    check(
        core < Duration::from_secs(1) && accepted == 100_000,
        format!("gating + association of 100k frames x 10 objects in {core:.2?} (with parse and write: {full:.2?})"),
        format!("gating + association took {core:.2?}"),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_droptrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let config = SimConfig {
        num_particles: 6,
        frame_count: 2000,
        p_miss: 0.003,
        p_false_positive: 0.01,
        seed: 8,
        ..SimConfig::default()
    };
    fs::write(
        dir.join("sim.json"),
        serde_json::to_string(&config).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let labels = dir.join("labels");
    fs::create_dir_all(&labels).map_err(|e| e.to_string())?;
    for f in [0u32, 1, 3] {
        let body = format!("0 0.{f}5 0.5 0.01 0.01 0.9\n0 0.7 0.{f}1 0.02 0.01 0.8\n");
        fs::write(labels.join(format!("cam_{f}.txt")), body).map_err(|e| e.to_string())?;
    }
    cli(
        dir,
        &[
            "simulate",
            "--config",
            "sim.json",
            "--out",
            "det.jsonl",
            "--truth",
            "truth.csv",
        ],
    )?;
    cli(
        dir,
        &[
            "track",
            "--in",
            "det.jsonl",
            "--expected-count",
            "6",
            "--out",
            "tracks.csv",
            "--report",
            "track.json",
        ],
    )?;
    cli(
        dir,
        &[
            "evaluate",
            "--tracks",
            "tracks.csv",
            "--truth",
            "truth.csv",
            "--report",
            "eval.json",
        ],
    )?;
    cli(
        dir,
        &[
            "analyze",
            "--tracks",
            "tracks.csv",
            "--fps",
            "30",
            "--speed-map",
            "map.csv",
            "--grid",
            "12x12",
            "--flow",
            "flow.svg",
        ],
    )?;
    cli(
        dir,
        &[
            "import-yolo",
            "--dir",
            "labels",
            "--width",
            "1280",
            "--height",
            "720",
            "--out",
            "yolo.jsonl",
        ],
    )?;
    Ok(())
}

fn ac8_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let outputs = [
        "det.jsonl",
        "truth.csv",
        "tracks.csv",
        "track.json",
        "eval.json",
        "map.csv",
        "flow.svg",
        "yolo.jsonl",
    ];
    let mut bytes = 0;
    for name in outputs {
        let x = fs::read(a.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = fs::read(b.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
        bytes += x.len();
    }
    Ok(format!(
        "{} output files ({bytes} bytes) identical across two runs",
        outputs.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC-1", ac1_assignment_oracle),
        ("AC-2", ac2_fdr_table),
        ("AC-3", ac3_ten_particles),
        ("AC-4", ac4_rejected_frames),
        ("AC-5", ac5_swap_control),
        ("AC-6", ac6_speed_analytics),
        ("AC-7", ac7_throughput),
        ("AC-8", ac8_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(msg) => println!("{name} PASS: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{name} FAIL: {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
