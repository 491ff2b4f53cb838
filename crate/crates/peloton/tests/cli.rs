use std::path::Path;
use std::process::{Command, Output};

fn peloton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peloton")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_race(dir: &Path) -> (String, String, String) {
    let events = dir.join("events.csv");
    let truth = dir.join("truth.txt");
    let course = dir.join("course.csv");
    let out = peloton(&[
        "generate",
        "--athletes",
        "500",
        "--control-points",
        "20",
        "--random",
        "--divide",
        "0.1",
        "--seed",
        "4",
        "--events",
        path(&events),
        "--truth",
        path(&truth),
        "--course-out",
        path(&course),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (path(&events).into(), path(&truth).into(), path(&course).into())
}

#[test]
fn generated_race_verifies_against_its_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (events, truth, _) = small_race(dir.path());
    for mode in ["finalized", "online"] {
        let out = peloton(&["verify", "--input", &events, "--truth", &truth, "--mode", mode]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("match"));
    }
    // other parameters predict other patterns
    let out = peloton(&["verify", "--input", &events, "--truth", &truth, "--min-group", "30"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn records_are_byte_identical_across_runs_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let (events, _, course) = small_race(dir.path());
    let args = |mode: &'static str| {
        vec![
            "analyze",
            "--input",
            &events,
            "--course",
            &course,
            "--out",
            "records",
            "--report",
            "summary,patterns,longterm,labels,status,anomalies",
            "--mode",
            mode,
        ]
    };
    let a = peloton(&args("finalized"));
    let b = peloton(&args("finalized"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let online = peloton(&args("online"));
    let strip = |o: &Output| String::from_utf8(o.stdout.clone()).unwrap().replace("\"mode\":\"online\"", "\"mode\":\"finalized\"");
    assert_eq!(strip(&a), strip(&online));
    let text = String::from_utf8(a.stdout).unwrap();
    for kind in ["summary", "cp", "pattern", "longest", "labels", "status"] {
        let tag = format!("{{\"record\":\"{kind}\"");
        assert!(text.lines().any(|l| l.starts_with(&tag)), "no {kind} record");
    }
    assert!(text.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn sweep_prints_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let (events, _, _) = small_race(dir.path());
    let out = peloton(&["analyze", "--input", &events, "--epsilon-sweep", "0,2000,60000", "--out", "records"]);
    assert!(out.status.success());
    let rows: Vec<serde_json::Value> = String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let eps: Vec<u64> = rows.iter().map(|r| r["epsilon_ms"].as_u64().unwrap()).collect();
    assert_eq!(eps, [0, 2000, 60000]);
    let total = |r: &serde_json::Value| r["components"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum::<u64>();
    assert!(total(&rows[0]) >= total(&rows[1]) && total(&rows[1]) >= total(&rows[2]));
}

#[test]
fn wide_input_with_status_and_anomalies() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("splits.csv");
    let course = dir.path().join("course.csv");
    std::fs::write(
        &input,
        "bib,5K,10K,15K,20K\n1,0:20:00,0:40:00,1:00:00,1:20:00\n2,0:20:01,0:40:01,,1:20:02\n3,0:20:02,0:40:02,1:00:02,2:10:00\n",
    )
    .unwrap();
    std::fs::write(&course, "index,meters\n0,5000\n1,10000\n2,15000\n3,20000\n").unwrap();
    let out = peloton(&[
        "analyze",
        "--input",
        path(&input),
        "--course",
        path(&course),
        "--min-group",
        "2",
        "--report",
        "status,anomalies",
        "--athlete",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("athlete 2 position 2 at cp 3"), "{text}");
    assert!(text.contains("skipped-cp athlete 2 cp 2"), "{text}");
    assert!(text.contains("pace-jump athlete 3 cp 3"), "{text}");
    assert!(text.contains("segment 4:00 min/km"), "{text}");
}

#[test]
fn bad_input_and_flags_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(peloton(&["analyze", "--input", path(&missing)]).status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "athlete_id,control_point,time_ms\nx,y,z\n").unwrap();
    let out = peloton(&["analyze", "--input", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let good = dir.path().join("good.csv");
    std::fs::write(&good, "athlete_id,control_point,time_ms\n1,0,0\n").unwrap();
    assert!(!peloton(&["analyze", "--input", path(&good), "--mu", "1/2"]).status.success());
    assert!(!peloton(&["analyze", "--input", path(&good), "--report", "everything"]).status.success());
    assert!(!peloton(&["analyze", "--input", path(&good), "--min-group", "0"]).status.success());
    assert!(peloton(&["analyze", "--input", path(&good)]).status.success());
}
