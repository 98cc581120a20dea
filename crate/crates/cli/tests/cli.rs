mod common;

use common::*;
use mushra_cli::CliReport;
use mushra_core::protocol::{read_wav, write_wav, AudioClip, WavFormat};

const SYSTEMS: [&str; 4] = ["FS2", "ST2", "VITS", "REF"];

fn planted(r: usize, u: usize, s: &str) -> f64 {
    let base = match s {
        "FS2" => 40.0,
        "ST2" => 55.0,
        "VITS" => 70.0,
        _ => 92.0,
    };
    base + ((r * 7 + u * 3) % 5) as f64
}

#[test]
fn ingest_counts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let data = mushra_csv(&dir.path().join("r.csv"), 2, 5, &SYSTEMS, planted);
    let out = ok(&["ingest", "--dataset", p(&data)]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("40 records, 0 rejects"));

    let mut text = std::fs::read_to_string(&data).unwrap();
    text.push_str("hi,MUSHRA,c1,r009,0,u000,FS2,105\n");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, text).unwrap();
    let base = dir.path().join("clean");
    let out = mushra(&["ingest", "--dataset", p(&bad), "--out", p(&base)]);
    assert_eq!(code(&out), 1);
    let rejects = std::fs::read_to_string(dir.path().join("clean.rejects.csv")).unwrap();
    assert!(rejects.contains("out of [0,100]"), "{rejects}");
    ok(&["ingest", "--dataset", p(&bad), "--allow-rejects"]);

    let mapping = dir.path().join("m.json");
    std::fs::write(&mapping, r#"{"columns": {"rater_id": "annotator"}}"#).unwrap();
    let out = mushra(&["ingest", "--dataset", p(&data), "--mapping", p(&mapping)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not mapped"));

    let out = mushra(&["ingest", "--dataset", p(&dir.path().join("missing.csv"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn export_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = mushra_csv(&dir.path().join("r.csv"), 3, 4, &SYSTEMS, planted);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["export", "--dataset", p(&data), "--out", p(&a)]);
    ok(&["export", "--dataset", p(&dir.path().join("a.jsonl")), "--out", p(&b)]);
    for ext in ["a.csv", "a.jsonl"] {
        let first = std::fs::read(dir.path().join(ext)).unwrap();
        let second = std::fs::read(dir.path().join(ext.replace('a', "b"))).unwrap();
        assert_eq!(first, second, "{ext}");
    }
    let report: CliReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.report.json")).unwrap()).unwrap();
    assert_eq!(report.command, "export");
    assert_eq!(report.outputs.len(), 2);
    assert_eq!(report.inputs[0].sha256, mushra_cli::report::file_sha256(&data).unwrap());
    assert_eq!(code(&mushra(&["export", "--dataset", p(&data)])), 1);
}

#[test]
fn summarize_table_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let data = mushra_csv(&dir.path().join("r.csv"), 2, 3, &SYSTEMS, planted);
    let out = ok(&["summarize", "--dataset", p(&data)]);
    let (header, rows) = csv_table(&out.stdout);
    assert_eq!(header, ["group", "mean", "sd", "ci95", "n", "bin"]);
    let reference = rows.iter().find(|r| r[0] == "REF").unwrap();
    assert_eq!(reference[4], "6");
    assert_eq!(reference[5], "Excellent");
    let fs2 = rows.iter().find(|r| r[0] == "FS2").unwrap();
    assert_eq!(fs2[5], "Fair");

    let single = dir.path().join("one.csv");
    mushra_csv(&single, 1, 1, &SYSTEMS, planted);
    let out = ok(&["summarize", "--dataset", p(&single)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sd undefined"));

    let out = mushra(&["summarize", "--dataset", p(&data), "--language", "ta"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("matched no records"));
    assert_eq!(code(&mushra(&["summarize", "--dataset", p(&data), "--variant", "NOPE"])), 1);
}

#[test]
fn screen_standard_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    // r001 scores the hidden reference at 85 on every page
    let data = mushra_csv(&dir.path().join("r.csv"), 3, 10, &SYSTEMS, |r, u, s| {
        if s == "REF" && r == 1 {
            85.0
        } else {
            planted(r, u, s)
        }
    });
    let out = ok(&["screen", "--dataset", p(&data)]);
    let (_, rows) = csv_table(&out.stdout);
    let verdicts: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[4].as_str())).collect();
    assert_eq!(verdicts, [("r000", "retained"), ("r001", "rejected"), ("r002", "retained")]);

    let out = ok(&["screen", "--dataset", p(&data), "--lambda", "0:100:10"]);
    let (header, rows) = csv_table(&out.stdout);
    assert_eq!(header[0], "lambda");
    let mut retained: Vec<(f64, usize)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    retained.dedup();
    assert_eq!(retained.len(), 11);
    assert!(retained.windows(2).all(|w| w[1].1 <= w[0].1));
    assert_eq!(retained[0].1, 3);
    assert_eq!(retained[10].1, 0);
}

#[test]
fn sensitivity_is_seeded_and_exact_at_full_size() {
    let dir = tempfile::tempdir().unwrap();
    let data = mushra_csv(&dir.path().join("r.csv"), 6, 8, &SYSTEMS, planted);
    let run = |seed: &str, out: &str, extra: &[&str]| {
        let path = dir.path().join(out);
        let mut args = vec![
            "sensitivity", "--dataset", p(&data), "--grid", "2,all:3,all", "--trials", "50", "--seed", seed,
            "--out", p(&path),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(&path).unwrap()
    };
    let a = run("11", "a.csv", &[]);
    let b = run("11", "b.csv", &["--sequential"]);
    assert_eq!(a, b);
    let (_, rows) = csv_table(&a);
    assert_eq!(rows.len(), 4);
    let full = rows.iter().find(|r| r[0] == "6" && r[1] == "8").unwrap();
    assert_eq!(full[2], "1");
    // the planted fixture is strictly ordered on every rating
    assert!(rows.iter().all(|r| r[2] == "1"));

    let json = run("11", "a.json", &[]);
    assert_same_values(&a, &json);

    let report: CliReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.csv.report.json")).unwrap()).unwrap();
    assert_eq!(report.seed, 11);
    assert_eq!(report.execution, "sequential");

    let out = mushra(&["sensitivity", "--dataset", p(&data), "--grid", "7:1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn correlate_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "sys,mos,pesq\na,1,3\nb,2,5\nc,3,7\nd,4,9\n").unwrap();
    let out = ok(&["correlate", "--dataset", p(&path), "--x", "mos", "--y", "pesq"]);
    let (_, rows) = csv_table(&out.stdout);
    assert_eq!(rows[0][4], "1");
    let out = mushra(&["correlate", "--dataset", p(&path), "--x", "mos", "--y", "stoi"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown column \"stoi\""));
}

#[test]
fn cmos_faults_timing_demographics_agree_across_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cmos = dir.path().join("cmos.csv");
    let mut text = String::from("language,variant,campaign_id,rater_id,page_index,utterance_id,system_id,cmos\n");
    for (i, v) in [1.0, 0.0, -1.0, 2.5, 0.5, 0.0].iter().enumerate() {
        let sys = if i < 3 { "VITS" } else { "ST2" };
        text.push_str(&format!("ta,CMOS,c,r{i},{i},u{i},{sys},{v}\n"));
    }
    std::fs::write(&cmos, text).unwrap();

    let dg = dir.path().join("dg.csv");
    let mut text = String::from(
        "language,variant,campaign_id,rater_id,page_index,utterance_id,system_id,score,mp,sp,us,da,sef,ws,liveliness,voice_quality,rhythm,revised\n",
    );
    for i in 0..10 {
        let ws = u32::from(i < 3);
        text.push_str(&format!("hi,MUSHRA_DG,c,r{i},0,u0,FS2,0,0,0,0,0,0,{ws},90,90,90,false\n"));
    }
    std::fs::write(&dg, text).unwrap();

    let timings = dir.path().join("t.jsonl");
    let mut text = String::new();
    for (i, secs) in [120, 180, 240].iter().enumerate() {
        text.push_str(&format!(
            "{{\"session_id\":\"s{i}\",\"variant\":\"MUSHRA\",\"page_index\":0,\"opened_at\":\"2024-01-01T00:00:00Z\",\"submitted_at\":\"2024-01-01T00:{:02}:{:02}Z\",\"audio_duration_s\":60.0}}\n",
            secs / 60,
            secs % 60
        ));
    }
    std::fs::write(&timings, text).unwrap();

    let raters = dir.path().join("raters.csv");
    std::fs::write(&raters, "rater_id,language,gender,age\na,hi,female,22\nb,hi,female,25\nc,hi,male,41\nd,hi,,\n").unwrap();

    for (cmd, path) in [("cmos", &cmos), ("faults", &dg), ("timing", &timings), ("demographics", &raters)] {
        let csv = ok(&[cmd, "--dataset", p(path), "--csv"]).stdout;
        let json = ok(&[cmd, "--dataset", p(path), "--json"]).stdout;
        assert_same_values(&csv, &json);
        let (header, rows) = csv_table(&csv);
        match cmd {
            "cmos" => {
                let vits = rows.iter().find(|r| r[0] == "VITS").unwrap();
                assert_eq!(&vits[2..5], ["33.3", "33.3", "33.3"]);
            }
            "faults" => {
                let ws = header.iter().position(|h| h == "ws_rate").unwrap();
                assert_eq!(rows[0][ws], "0.3");
            }
            "timing" => {
                let agg = rows.iter().find(|r| r[1].is_empty()).unwrap();
                assert!(agg.contains(&"3".to_string()), "{agg:?}");
            }
            _ => {
                let female = rows.iter().find(|r| r[1] == "female").unwrap();
                assert_eq!(female.last().unwrap(), "2");
            }
        }
    }
}

#[test]
fn anchor_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.wav");
    let samples: Vec<f64> = (0..24_000)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 24_000.0).sin())
        .collect();
    write_wav(&input, &AudioClip::new(samples, 24_000).unwrap(), WavFormat::Int16).unwrap();
    let output = dir.path().join("anchor.wav");
    ok(&["anchor", p(&input), p(&output)]);
    let (clip, _) = read_wav(&output).unwrap();
    assert_eq!(clip.sample_rate, 24_000);
    assert!((clip.samples.len() as i64 - 24_000).abs() <= 1);

    let text = dir.path().join("notes.wav");
    std::fs::write(&text, "this is not a RIFF file, just some text that is long enough").unwrap();
    assert_eq!(code(&mushra(&["anchor", p(&text), p(&output)])), 1);
    assert_eq!(code(&mushra(&["anchor", p(&dir.path().join("nope.wav")), p(&output)])), 2);
}

#[test]
fn assemble_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{"variant":"MUSHRA_NMR","systems":["FS2","ST2","VITS"],"utterances":["u1","u2","u3"],"reference_source":"GT"}"#,
    )
    .unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&["assemble", "--plan", p(&plan), "--raters", "3", "--seed", seed, "--out", p(&out)]);
        std::fs::read(out).unwrap()
    };
    let a = run("5", "a.json");
    assert_eq!(a, run("5", "b.json"));
    assert_ne!(a, run("6", "c.json"));
    let doc: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc["pages"].as_array().unwrap().len(), 3);
    assert!(doc["pages"][0][0]["explicit_reference"].is_null());

    std::fs::write(&plan, r#"{"variant":"MUSHRA","systems":[],"utterances":["u1"],"reference_source":"GT"}"#).unwrap();
    assert_eq!(code(&mushra(&["assemble", "--plan", p(&plan)])), 1);
}

#[test]
fn dg_vectors_match_bundle() {
    let out = ok(&["dg-vectors"]);
    assert_eq!(out.stdout, mushra_core::dg::DG_TEST_VECTORS_JSON.as_bytes());
}
