#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mushra_cli::table::value_cell;
use serde_json::Value;

pub fn mushra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mushra"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = mushra(args);
    assert!(
        out.status.success(),
        "mushra {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub const HEADER: &str = "language,variant,campaign_id,rater_id,page_index,utterance_id,system_id,score";

/// A MUSHRA ratings CSV with every rater rating every utterance.
pub fn mushra_csv<F>(path: &Path, raters: usize, utterances: usize, systems: &[&str], score: F) -> PathBuf
where
    F: Fn(usize, usize, &str) -> f64,
{
    let mut text = String::from(HEADER);
    text.push('\n');
    for r in 0..raters {
        for u in 0..utterances {
            for s in systems {
                text.push_str(&format!(
                    "hi,MUSHRA,c1,r{r:03},{u},u{u:03},{s},{:.1}\n",
                    score(r, u, s)
                ));
            }
        }
    }
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

pub fn csv_table(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(bytes);
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

/// Asserts that a JSON array of row objects holds exactly the CSV cells.
pub fn assert_same_values(csv_bytes: &[u8], json_bytes: &[u8]) {
    let (header, rows) = csv_table(csv_bytes);
    let json: Vec<serde_json::Map<String, Value>> = serde_json::from_slice(json_bytes).unwrap();
    assert_eq!(json.len(), rows.len());
    for (obj, row) in json.iter().zip(&rows) {
        assert_eq!(obj.len(), header.len());
        for (h, cell) in header.iter().zip(row) {
            assert_eq!(&value_cell(&obj[h]), cell, "column {h}");
        }
    }
}
