#![allow(dead_code)]

use std::path::Path;

use mushra_core::protocol::{write_wav, AudioClip, TestPlan, TestVariant, WavFormat};
use mushra_server::{Config, PagePayload, RunningServer};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tempfile::TempDir;

pub const ADMIN: &str = "admin-secret";
pub const SYSTEMS: [&str; 3] = ["FS2", "ST2", "VITS"];

pub struct Harness {
    pub dir: TempDir,
    pub server: Option<RunningServer>,
    pub http: Client,
}

pub fn utterances(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("utt{i:03}")).collect()
}

pub fn write_catalog(root: &Path, systems: &[&str], utts: &[String]) {
    for (si, s) in systems.iter().enumerate() {
        std::fs::create_dir_all(root.join(s)).unwrap();
        for (ui, u) in utts.iter().enumerate() {
            let freq = 200.0 + 50.0 * si as f64 + 7.0 * ui as f64;
            let samples = (0..8000)
                .map(|i| 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin())
                .collect();
            let clip = AudioClip::new(samples, 16000).unwrap();
            write_wav(root.join(s).join(format!("{u}.wav")), &clip, WavFormat::Int16).unwrap();
        }
    }
}

impl Harness {
    pub async fn start() -> Harness {
        let dir = tempfile::tempdir().unwrap();
        let mut all: Vec<&str> = SYSTEMS.to_vec();
        all.push("GT");
        write_catalog(&dir.path().join("audio"), &all, &utterances(10));
        let mut h = Harness {
            dir,
            server: None,
            http: Client::new(),
        };
        h.boot().await;
        h
    }

    pub fn config(&self) -> Config {
        Config {
            bind: "127.0.0.1".into(),
            port: 0,
            data_dir: self.dir.path().join("data"),
            audio_root: self.dir.path().join("audio"),
            admin_token: Some(ADMIN.into()),
        }
    }

    pub async fn boot(&mut self) {
        self.server = Some(mushra_server::start(self.config()).await.unwrap());
    }

    pub async fn restart(&mut self) {
        self.server.take().unwrap().shutdown().await.unwrap();
        self.boot().await;
    }

    pub fn url(&self, path: &str) -> String {
        self.server.as_ref().unwrap().url(path)
    }

    pub fn plan(&self, variant: TestVariant, n_utts: usize) -> TestPlan {
        let u = utterances(n_utts);
        let refs: Vec<&str> = u.iter().map(String::as_str).collect();
        let mut p = TestPlan::new(variant, &SYSTEMS, &refs, "GT");
        p.language = "hi".into();
        p
    }

    pub async fn create(&self, id: &str, plan: &TestPlan, raters: usize) -> Value {
        let r = self
            .http
            .post(self.url("/campaigns"))
            .bearer_auth(ADMIN)
            .json(&json!({ "campaign_id": id, "plan": plan, "seed": 7, "raters": raters }))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::CREATED, "{}", r.text().await.unwrap());
        r.json().await.unwrap()
    }

    pub async fn open(&self, invite: &str) -> Value {
        let r = self
            .http
            .post(self.url("/sessions"))
            .json(&json!({ "invite_token": invite, "consent": true, "device": "headphones" }))
            .send()
            .await
            .unwrap();
        assert!(r.status().is_success());
        r.json().await.unwrap()
    }

    pub async fn next(&self, sid: &str) -> (String, Value) {
        let text = self
            .http
            .get(self.url(&format!("/sessions/{sid}/next")))
            .send()
            .await
            .unwrap()
            .text()
            .await
            .unwrap();
        let v = serde_json::from_str(&text).unwrap();
        (text, v)
    }

    pub async fn event(&self, sid: &str, page: usize, kind: &str, slot: Option<&str>) -> StatusCode {
        self.http
            .post(self.url(&format!("/sessions/{sid}/events")))
            .json(&json!({ "page_index": page, "kind": kind, "slot_id": slot }))
            .send()
            .await
            .unwrap()
            .status()
    }

    pub async fn play_all(&self, sid: &str, page: &PagePayload) {
        for s in &page.slots {
            assert_eq!(self.event(sid, page.page_index, "play_start", Some(&s.slot_id)).await, StatusCode::ACCEPTED);
            assert_eq!(self.event(sid, page.page_index, "play_complete", Some(&s.slot_id)).await, StatusCode::ACCEPTED);
        }
    }

    pub async fn submit(&self, sid: &str, page: usize, body: Value) -> (StatusCode, Value) {
        let r = self
            .http
            .post(self.url(&format!("/sessions/{sid}/pages/{page}")))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status();
        let text = r.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    pub async fn export(&self, id: &str, format: &str) -> (String, Vec<u8>) {
        let r = self
            .http
            .get(self.url(&format!("/admin/campaigns/{id}/export?format={format}")))
            .bearer_auth(ADMIN)
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::OK);
        let status = r.headers()["x-export-status"].to_str().unwrap().to_string();
        (status, r.bytes().await.unwrap().to_vec())
    }

    pub fn campaign_file(&self, id: &str) -> mushra_server::Campaign {
        let text = std::fs::read_to_string(self.dir.path().join("data/campaigns").join(format!("{id}.json"))).unwrap();
        serde_json::from_str(&text).unwrap()
    }
}

pub fn scores(page: &PagePayload, v: f64) -> Value {
    let map: serde_json::Map<String, Value> = page.slots.iter().map(|s| (s.slot_id.clone(), json!(v))).collect();
    Value::Object(map)
}
