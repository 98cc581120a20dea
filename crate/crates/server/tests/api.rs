mod common;

use common::*;
use mushra_core::protocol::TestVariant;
use mushra_core::store::{import_reader, ColumnMapping, DatasetFormat};
use mushra_server::PagePayload;
use reqwest::StatusCode;
use serde_json::{json, Value};

async fn first_page(h: &Harness, invite: &str) -> (String, PagePayload) {
    let s = h.open(invite).await;
    let sid = s["session_id"].as_str().unwrap().to_string();
    let (_, v) = h.next(&sid).await;
    (sid, serde_json::from_value(v).unwrap())
}

#[tokio::test]
async fn campaign_creation_rules() {
    let h = Harness::start().await;
    let plan = h.plan(TestVariant::Mushra, 3);
    let body = json!({ "campaign_id": "c1", "plan": plan, "seed": 1, "raters": 2 });

    let r = h.http.post(h.url("/campaigns")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::UNAUTHORIZED);
    let r = h.http.post(h.url("/campaigns")).bearer_auth("wrong").json(&body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::UNAUTHORIZED);

    let created = h.create("c1", &plan, 2).await;
    assert_eq!(created["invites"].as_array().unwrap().len(), 2);
    assert_eq!(created["status"], "live");

    let r = h.http.post(h.url("/campaigns")).bearer_auth(ADMIN).json(&body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CONFLICT);

    // 11 systems + hidden reference + anchor = 13 slots
    let mut big = plan.clone();
    big.systems = (0..11).map(|i| format!("S{i}").as_str().into()).collect();
    let r = h
        .http
        .post(h.url("/campaigns"))
        .bearer_auth(ADMIN)
        .json(&json!({ "campaign_id": "big", "plan": big, "seed": 1, "raters": 1 }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let err: Value = r.json().await.unwrap();
    assert!(err["message"].as_str().unwrap().contains("13 blind slots"), "{err}");

    let mut missing = plan.clone();
    missing.systems.push("XTTS".into());
    let r = h
        .http
        .post(h.url("/campaigns"))
        .bearer_auth(ADMIN)
        .json(&json!({ "campaign_id": "m", "plan": missing, "seed": 1, "raters": 1 }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json::<Value>().await.unwrap()["error"], "missing_audio");
}

#[tokio::test]
async fn same_seed_gives_same_pages() {
    let h = Harness::start().await;
    let plan = h.plan(TestVariant::Mushra, 4);
    h.create("a", &plan, 2).await;
    h.create("b", &plan, 2).await;
    let (a, b) = (h.campaign_file("a"), h.campaign_file("b"));
    assert_eq!(a.pages, b.pages);
}

#[tokio::test]
async fn consent_and_resume() {
    let h = Harness::start().await;
    let created = h.create("c", &h.plan(TestVariant::Mushra, 2), 1).await;
    let invite = created["invites"][0].as_str().unwrap();

    let refused = |consent: bool, token: &str| {
        h.http
            .post(h.url("/sessions"))
            .json(&json!({ "invite_token": token, "consent": consent, "device": "loudspeakers" }))
            .send()
    };
    let r = refused(false, invite).await.unwrap();
    assert_eq!(r.status(), StatusCode::FORBIDDEN);
    assert_eq!(r.json::<Value>().await.unwrap()["error"], "consent_required");
    let r = refused(true, "nope").await.unwrap();
    assert_eq!(r.status(), StatusCode::FORBIDDEN);

    let r = refused(true, invite).await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let first: Value = r.json().await.unwrap();
    let again = h.open(invite).await;
    assert_eq!(again["session_id"], first["session_id"]);
    assert_eq!(again["resumed"], true);

    let r = h.http.get(h.url("/sessions/unknown/next")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn payload_shapes() {
    let h = Harness::start().await;
    let mushra = h.create("m", &h.plan(TestVariant::Mushra, 2), 1).await;
    let nmr = h.create("n", &h.plan(TestVariant::MushraNmr, 2), 1).await;
    let dg = h.create("d", &h.plan(TestVariant::MushraDg, 2), 1).await;

    let (_, p) = first_page(&h, mushra["invites"][0].as_str().unwrap()).await;
    assert_eq!(p.page_index, 0);
    assert_eq!(p.slots.len(), 5);
    assert!(p.reference_url.is_some());
    assert!(p.scoresheet.is_none());

    let (_, p) = first_page(&h, nmr["invites"][0].as_str().unwrap()).await;
    assert!(p.reference_url.is_none());

    let (_, p) = first_page(&h, dg["invites"][0].as_str().unwrap()).await;
    let sheet = p.scoresheet.unwrap();
    assert_eq!(sheet.counts.len(), 6);
    assert_eq!(sheet.weights.ws_penalty, 25.0);
}

#[tokio::test]
async fn playback_gating_and_validation() {
    let h = Harness::start().await;
    let c = h.create("g", &h.plan(TestVariant::Mushra, 2), 1).await;
    let (sid, page) = first_page(&h, c["invites"][0].as_str().unwrap()).await;
    let body = json!({ "idempotency_token": "t1", "scores": scores(&page, 50.0) });

    let (st, err) = h.submit(&sid, 0, body.clone()).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "playback_incomplete");
    assert_eq!(err["slots"].as_array().unwrap().len(), 5);

    for s in &page.slots[1..] {
        h.event(&sid, 0, "play_complete", Some(&s.slot_id)).await;
    }
    // play_start alone does not count
    h.event(&sid, 0, "play_start", Some(&page.slots[0].slot_id)).await;
    let (st, err) = h.submit(&sid, 0, body.clone()).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["slots"], json!([page.slots[0].slot_id]));

    h.event(&sid, 0, "play_complete", Some(&page.slots[0].slot_id)).await;
    let mut bad = scores(&page, 50.0);
    bad[&page.slots[2].slot_id] = json!(105.0);
    let (st, err) = h.submit(&sid, 0, json!({ "idempotency_token": "t0", "scores": bad })).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let field = &err["fields"][0];
    assert_eq!(field["field"], format!("scores.{}", page.slots[2].slot_id));
    assert!(field["reason"].as_str().unwrap().contains("out of [0,100]"), "{field}");

    let (st, ack) = h.submit(&sid, 0, body.clone()).await;
    assert_eq!(st, StatusCode::OK, "{ack}");
    assert_eq!(ack["records"], 5);

    // idempotent replay
    let (st, again) = h.submit(&sid, 0, body).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(again, ack);
    let (_, csv) = h.export("g", "csv").await;
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 5);

    // a new token cannot resubmit a finished page
    let (st, err) = h.submit(&sid, 0, json!({ "idempotency_token": "t2", "scores": scores(&page, 1.0) })).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["error"], "already_submitted");
}

#[tokio::test]
async fn events_must_be_ordered() {
    let h = Harness::start().await;
    let c = h.create("e", &h.plan(TestVariant::Mushra, 1), 1).await;
    let (sid, page) = first_page(&h, c["invites"][0].as_str().unwrap()).await;
    let post = |ts: &str| {
        h.http
            .post(h.url(&format!("/sessions/{sid}/events")))
            .json(&json!({ "page_index": 0, "kind": "slider_move", "slot_id": page.slots[0].slot_id, "timestamp": ts }))
            .send()
    };
    assert_eq!(post("2030-01-01T00:00:10Z").await.unwrap().status(), StatusCode::ACCEPTED);
    assert_eq!(post("2030-01-01T00:00:10Z").await.unwrap().status(), StatusCode::ACCEPTED);
    assert_eq!(post("2030-01-01T00:00:09Z").await.unwrap().status(), StatusCode::CONFLICT);
    assert_eq!(h.event(&sid, 0, "play_start", Some("zzzzzzzz")).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(h.event(&sid, 9, "page_open", None).await, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn drafts_survive_restart() {
    let mut h = Harness::start().await;
    let c = h.create("r", &h.plan(TestVariant::Mushra, 3), 1).await;
    let invite = c["invites"][0].as_str().unwrap().to_string();
    let (sid, page) = first_page(&h, &invite).await;
    h.play_all(&sid, &page).await;
    let (st, _) = h.submit(&sid, 0, json!({ "idempotency_token": "p0", "scores": scores(&page, 70.0) })).await;
    assert_eq!(st, StatusCode::OK);

    let (_, v) = h.next(&sid).await;
    let page1: PagePayload = serde_json::from_value(v).unwrap();
    assert_eq!(page1.page_index, 1);
    let draft = json!({ "scores": scores(&page1, 33.3) });
    let r = h
        .http
        .post(h.url(&format!("/sessions/{sid}/draft")))
        .json(&json!({ "page_index": 1, "answers": draft }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::NO_CONTENT);
    let r = h
        .http
        .post(h.url(&format!("/sessions/{sid}/draft")))
        .json(&json!({ "page_index": 2, "answers": {} }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CONFLICT);

    h.restart().await;
    let resumed = h.open(&invite).await;
    assert_eq!(resumed["session_id"], sid.as_str());
    assert_eq!(resumed["next_page"], 1);
    let (_, v) = h.next(&sid).await;
    let back: PagePayload = serde_json::from_value(v).unwrap();
    assert_eq!(back.page_index, 1);
    assert_eq!(back.slots, page1.slots);
    assert_eq!(back.partial_answers, Some(draft));
}

#[tokio::test]
async fn dg_scores_are_recomputed_and_revisions_tracked() {
    let h = Harness::start().await;
    let c = h.create("dg", &h.plan(TestVariant::MushraDg, 1), 1).await;
    let (sid, page) = first_page(&h, c["invites"][0].as_str().unwrap()).await;
    h.play_all(&sid, &page).await;
    h.event(&sid, 0, "revision", Some(&page.slots[1].slot_id)).await;
    let sheet = |ws: u32| json!({ "mp": 0, "sp": 0, "us": 0, "da": 0, "sef": 0, "ws": ws,
        "liveliness": 90.0, "voice_quality": 90.0, "rhythm": 90.0 });
    let mut sheets = serde_json::Map::new();
    for (i, s) in page.slots.iter().enumerate() {
        sheets.insert(s.slot_id.clone(), sheet(u32::from(i == 0)));
    }
    let mut broken = sheets.clone();
    broken.insert(page.slots[3].slot_id.clone(), json!({ "mp": -1, "sp": 0, "us": 0, "da": 0, "sef": 0, "ws": 0,
        "liveliness": 90.0, "voice_quality": 90.0, "rhythm": 90.0 }));
    let (st, err) = h.submit(&sid, 0, json!({ "idempotency_token": "x", "sheets": broken })).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{err}");
    assert!(err["fields"][0]["reason"].as_str().unwrap().contains("mp"));

    let (st, _) = h.submit(&sid, 0, json!({ "idempotency_token": "y", "sheets": sheets })).await;
    assert_eq!(st, StatusCode::OK);
    let (_, jsonl) = h.export("dg", "jsonl").await;
    let records = import_reader(jsonl.as_slice(), DatasetFormat::JsonLines, &ColumnMapping::canonical())
        .unwrap()
        .records;
    let by_slot = |slot: &str| records.iter().find(|r| r.slot_id.as_deref() == Some(slot)).unwrap();
    assert_eq!(by_slot(&page.slots[0].slot_id).score.unwrap().value(), 65.0);
    assert_eq!(by_slot(&page.slots[2].slot_id).score.unwrap().value(), 90.0);
    assert!(by_slot(&page.slots[1].slot_id).dg.unwrap().sheet.revised);
    assert!(!by_slot(&page.slots[2].slot_id).dg.unwrap().sheet.revised);
    let stats = mushra_core::analysis::revision_rate(&records);
    assert_eq!((stats.revised, stats.total), (1, 5));
}

#[tokio::test]
async fn cmos_answers_are_oriented_towards_the_system() {
    let h = Harness::start().await;
    let c = h.create("cm", &h.plan(TestVariant::Cmos, 2), 1).await;
    let (sid, _) = first_page(&h, c["invites"][0].as_str().unwrap()).await;
    let campaign = h.campaign_file("cm");
    loop {
        let (_, v) = h.next(&sid).await;
        if v["done"] == true {
            break;
        }
        let page: PagePayload = serde_json::from_value(v).unwrap();
        assert_eq!(page.slots.len(), 2);
        assert_eq!(page.cmos_scale.as_ref().unwrap().len(), 13);
        assert!(page.reference_url.is_none());
        h.play_all(&sid, &page).await;
        let (st, _) = h.submit(&sid, page.page_index, json!({ "idempotency_token": format!("k{}", page.page_index), "cmos": 1.5 })).await;
        assert_eq!(st, StatusCode::OK);
        let (st, _) = h.submit(&sid, page.page_index + 1, json!({ "idempotency_token": "bad", "cmos": 0.3 })).await;
        assert!(st == StatusCode::UNPROCESSABLE_ENTITY || st == StatusCode::CONFLICT || st == StatusCode::NOT_FOUND);
    }
    let (_, jsonl) = h.export("cm", "jsonl").await;
    let records = import_reader(jsonl.as_slice(), DatasetFormat::JsonLines, &ColumnMapping::canonical())
        .unwrap()
        .records;
    assert_eq!(records.len(), 6);
    for r in &records {
        let page = &campaign.pages[0][r.page_index];
        let system_is_b = page.slots[1].system_id == r.system_id;
        let expected = if system_is_b { 1.5 } else { -1.5 };
        assert_eq!(r.cmos.unwrap().value(), expected);
    }
    let prefs = mushra_core::analysis::cmos_preferences(&records);
    assert_eq!(prefs.rows.len(), 3);
}

#[tokio::test]
async fn audio_delivery() {
    let h = Harness::start().await;
    let c = h.create("au", &h.plan(TestVariant::Mushra, 1), 1).await;
    let (_, page) = first_page(&h, c["invites"][0].as_str().unwrap()).await;
    let campaign = h.campaign_file("au");
    for slot in &page.slots {
        let r = h.http.get(h.url(&slot.audio_url)).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::OK);
        assert_eq!(r.headers()["content-type"], "audio/wav");
        let bytes = r.bytes().await.unwrap();
        assert_eq!(&bytes[..4], b"RIFF");
        let spec = campaign.pages[0][0].slot(&slot.slot_id).unwrap();
        if spec.is_anchor {
            let tmp = h.dir.path().join("anchor.wav");
            std::fs::write(&tmp, &bytes).unwrap();
            let (clip, _) = mushra_core::protocol::read_wav(&tmp).unwrap();
            assert_eq!(clip.samples.len(), 8000);
            assert_eq!(clip.sample_rate, 16000);
        }
    }
    let r = h
        .http
        .get(h.url(&page.slots[0].audio_url))
        .header("range", "bytes=0-3")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::PARTIAL_CONTENT);
    assert_eq!(&r.bytes().await.unwrap()[..], b"RIFF");
    let r = h.http.get(h.url("/audio/doesnotexist")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_and_close() {
    let h = Harness::start().await;
    let c = h.create("x", &h.plan(TestVariant::Mushra, 2), 1).await;
    let (sid, page) = first_page(&h, c["invites"][0].as_str().unwrap()).await;
    h.event(&sid, 0, "page_open", None).await;
    h.play_all(&sid, &page).await;
    h.submit(&sid, 0, json!({ "idempotency_token": "a", "scores": scores(&page, 80.0) })).await;

    let r = h.http.get(h.url("/admin/campaigns/x/export")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::UNAUTHORIZED);
    let (status, first) = h.export("x", "csv").await;
    assert_eq!(status, "partial");
    let (_, second) = h.export("x", "csv").await;
    assert_eq!(first, second);

    let timings = h
        .http
        .get(h.url("/admin/campaigns/x/timings"))
        .bearer_auth(ADMIN)
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    let t: mushra_core::analysis::PageTiming = serde_json::from_str(timings.lines().next().unwrap()).unwrap();
    assert_eq!(t.audio_duration_s, 3.0);

    let r = h
        .http
        .post(h.url("/admin/campaigns/x/status"))
        .bearer_auth(ADMIN)
        .json(&json!({ "status": "closed" }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let (status, closed) = h.export("x", "csv").await;
    assert_eq!(status, "complete");
    assert_eq!(closed, first);
    let (_, v) = h.next(&sid).await;
    assert_eq!(v["done"], true);
    assert_eq!(v["reason"], "closed");
    let (st, _) = h.submit(&sid, 1, json!({ "idempotency_token": "b", "scores": scores(&page, 80.0) })).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let summary: Value = h
        .http
        .get(h.url("/admin/campaigns/x"))
        .bearer_auth(ADMIN)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(summary["records"], 5);
    assert_eq!(summary["sessions_started"], 1);
}
