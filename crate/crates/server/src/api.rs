use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, SubsecRound, Utc};
use mushra_core::analysis::timings_from_events;
use mushra_core::dg::{compute_dg_score, DgScoresheet};
use mushra_core::protocol::{PageSpec, TestPlan, TestVariant};
use mushra_core::rng;
use mushra_core::scale::{quantize_tenth, validate_cmos, Score};
use mushra_core::store::{
    export_csv, export_jsonl, now_millis, DeviceDeclaration, DgEntry, EventKind, EventRecord, RatingRecord,
    SessionState,
};
use mushra_core::ValidationError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::audio;
use crate::campaign::{valid_campaign_id, Campaign, CampaignStatus};
use crate::payload::{cmos_scale, guidelines, DonePayload, PagePayload, ScoresheetSchema, SlotPayload};
use crate::state::AppState;
use crate::ServerError;

pub const SESSION_ID_LEN: usize = 20;

/// JSON error body: `{"error": code, "message": ..., ...details}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": code, "message": message.into() }),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.body[key] = value;
        self
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        // details stay in the log: paths can name systems
        log::error!("internal error: {err}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal server error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<ServerError> for ApiError {
    fn from(e: ServerError) -> Self {
        use mushra_core::Error as E;
        match e {
            ServerError::Invalid(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", m),
            ServerError::Core(E::Validation(v)) => validation(vec![v]),
            ServerError::Core(E::Constraint(m)) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "constraint", m),
            ServerError::Core(e @ E::MissingAudio(_)) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "missing_audio", e.to_string())
            }
            ServerError::Core(E::NotFound(id)) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("session {id} not found"))
            }
            other => ApiError::internal(other),
        }
    }
}

impl From<mushra_core::Error> for ApiError {
    fn from(e: mushra_core::Error) -> Self {
        ServerError::Core(e).into()
    }
}

fn validation(errors: Vec<ValidationError>) -> ApiError {
    let fields: Vec<Value> = errors
        .iter()
        .map(|e| json!({ "field": e.field, "reason": e.reason }))
        .collect();
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", "answers failed validation")
        .with("fields", Value::Array(fields))
}

type ApiResult<T> = Result<T, ApiError>;
type St = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/campaigns", post(create_campaign))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(session_status))
        .route("/sessions/{id}/next", get(next_page))
        .route("/sessions/{id}/pages/{n}", post(submit_page))
        .route("/sessions/{id}/draft", post(save_draft))
        .route("/sessions/{id}/events", post(log_event))
        .route("/audio/{clip}", get(get_audio))
        .route("/admin/campaigns/{id}", get(admin_status))
        .route("/admin/campaigns/{id}/status", post(admin_set_status))
        .route("/admin/campaigns/{id}/export", get(admin_export))
        .route("/admin/campaigns/{id}/events", get(admin_events))
        .route("/admin/campaigns/{id}/timings", get(admin_timings))
        .with_state(state)
}

fn require_admin(state: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match (&state.config.admin_token, given) {
        (Some(expected), Some(given)) if constant_time_eq(expected.as_bytes(), given.as_bytes()) => Ok(()),
        _ => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "admin credential required")),
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn campaign_or_404(state: &AppState, id: &str) -> ApiResult<Arc<Campaign>> {
    state
        .campaign(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_campaign", format!("campaign {id} not found")))
}

// ---- campaigns ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateCampaign {
    pub campaign_id: Option<String>,
    pub plan: TestPlan,
    pub seed: u64,
    pub raters: usize,
    #[serde(default)]
    pub status: Option<CampaignStatus>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CampaignCreated {
    pub campaign_id: String,
    pub status: CampaignStatus,
    pub seed: u64,
    pub pages_per_rater: usize,
    pub invites: Vec<String>,
    pub warnings: Vec<String>,
}

async fn create_campaign(State(st): St, headers: HeaderMap, Json(req): Json<CreateCampaign>) -> ApiResult<Response> {
    require_admin(&st, &headers)?;
    let _guard = st.campaign_lock.lock().await;
    let id = match req.campaign_id {
        Some(id) => id,
        None => format!("c-{}", rng::token(&mut rand::rng(), 10)),
    };
    if !valid_campaign_id(&id) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", format!("invalid campaign id {id:?}")));
    }
    if st.campaign(&id).is_some() {
        return Err(ApiError::new(StatusCode::CONFLICT, "campaign_exists", format!("campaign {id} already exists")));
    }
    let status = req.status.unwrap_or(CampaignStatus::Live);
    let catalog = mushra_core::protocol::DirCatalog::new(&st.config.audio_root);
    let st2 = st.clone();
    let (campaign, warnings) = tokio::task::spawn_blocking(move || {
        let created = Campaign::create(&id, req.plan, req.seed, req.raters, status, &catalog)?;
        st2.store_campaign(created.0.clone())?;
        Ok::<_, ServerError>(created)
    })
    .await
    .map_err(ApiError::internal)??;
    log::info!("campaign {} created with {} raters", campaign.campaign_id, campaign.invites.len());
    let body = CampaignCreated {
        pages_per_rater: campaign.plan.pages_per_rater(),
        campaign_id: campaign.campaign_id,
        status: campaign.status,
        seed: campaign.seed,
        invites: campaign.invites,
        warnings,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

// ---- sessions ----

#[derive(Debug, Deserialize)]
pub struct OpenSession {
    pub invite_token: String,
    pub consent: bool,
    pub device: DeviceDeclaration,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub resumed: bool,
    pub total_pages: usize,
    pub completed_pages: usize,
    pub next_page: Option<usize>,
    pub done: bool,
}

fn info(s: &SessionState, resumed: bool) -> SessionInfo {
    SessionInfo {
        session_id: s.session_id.clone(),
        resumed,
        total_pages: s.total_pages,
        completed_pages: s.completed_pages.len(),
        next_page: s.next_page(),
        done: s.is_complete(),
    }
}

async fn open_session(State(st): St, Json(req): Json<OpenSession>) -> ApiResult<Response> {
    let Some((campaign_id, rater)) = st.invite(&req.invite_token) else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "invalid_invite", "invite token not recognised"));
    };
    if !req.consent {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "consent_required", "consent is required to take part"));
    }
    let lock = st.session_lock(&format!("invite:{}", req.invite_token));
    let _guard = lock.lock().await;
    if let Some(sid) = st.session_for_invite(&req.invite_token) {
        let s = st.sessions.load_session(&sid)?;
        return Ok((StatusCode::OK, Json(info(&s, true))).into_response());
    }
    let campaign = campaign_or_404(&st, &campaign_id)?;
    if campaign.status != CampaignStatus::Live {
        return Err(ApiError::new(StatusCode::CONFLICT, "campaign_not_live", "this campaign is not accepting raters"));
    }
    let session = SessionState {
        session_id: rng::token(&mut rand::rng(), SESSION_ID_LEN),
        rater_id: Campaign::rater_id(rater),
        campaign_id,
        invite_token: req.invite_token.clone(),
        consent_given: true,
        consent_at: Some(now_millis()),
        device: req.device,
        total_pages: campaign.pages[rater].len(),
        completed_pages: BTreeSet::new(),
        partial_answers: BTreeMap::new(),
        acknowledgements: BTreeMap::new(),
    };
    st.sessions.save_session(&session)?;
    st.bind_invite(&req.invite_token, &session.session_id);
    Ok((StatusCode::CREATED, Json(info(&session, false))).into_response())
}

struct Ctx {
    session: SessionState,
    campaign: Arc<Campaign>,
    rater: usize,
}

fn context(st: &AppState, sid: &str) -> ApiResult<Ctx> {
    let session = st.sessions.load_session(sid)?;
    let (campaign_id, rater) = st
        .invite(&session.invite_token)
        .ok_or_else(|| ApiError::internal(format!("session {sid} has an unknown invite")))?;
    Ok(Ctx {
        campaign: campaign_or_404(st, &campaign_id)?,
        session,
        rater,
    })
}

async fn session_status(State(st): St, Path(sid): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let ctx = context(&st, &sid)?;
    Ok(Json(info(&ctx.session, true)))
}

fn page_payload(ctx: &Ctx, page_index: usize) -> PagePayload {
    let c = &ctx.campaign;
    let page = &c.pages[ctx.rater][page_index];
    let clips = &c.page_clips[ctx.rater][page_index];
    let variant = c.plan.variant;
    PagePayload {
        done: false,
        session_id: ctx.session.session_id.clone(),
        page_index,
        total_pages: ctx.session.total_pages,
        completed_pages: ctx.session.completed_pages.len(),
        variant,
        guidelines: guidelines(variant).to_string(),
        slots: page
            .slots
            .iter()
            .map(|s| SlotPayload {
                slot_id: s.slot_id.clone(),
                audio_url: format!("/audio/{}", clips.slots[&s.slot_id]),
            })
            .collect(),
        reference_url: clips.reference.as_ref().map(|t| format!("/audio/{t}")),
        scoresheet: variant
            .collects_scoresheets()
            .then(|| ScoresheetSchema::new(c.plan.dg_weights)),
        cmos_scale: variant.is_cmos().then(cmos_scale),
        partial_answers: ctx.session.partial_answers.get(&page_index).cloned(),
    }
}

async fn next_page(State(st): St, Path(sid): Path<String>) -> ApiResult<Response> {
    let ctx = context(&st, &sid)?;
    let done = |reason: &str| {
        Json(DonePayload {
            done: true,
            session_id: sid.clone(),
            reason: reason.into(),
        })
        .into_response()
    };
    if ctx.campaign.status == CampaignStatus::Closed {
        return Ok(done("closed"));
    }
    match ctx.session.next_page() {
        None => Ok(done("complete")),
        Some(p) => Ok(Json(page_payload(&ctx, p)).into_response()),
    }
}

#[derive(Debug, Deserialize)]
pub struct Draft {
    pub page_index: usize,
    pub answers: Value,
}

async fn save_draft(State(st): St, Path(sid): Path<String>, Json(req): Json<Draft>) -> ApiResult<StatusCode> {
    let lock = st.session_lock(&sid);
    let _guard = lock.lock().await;
    let mut ctx = context(&st, &sid)?;
    if ctx.session.next_page() != Some(req.page_index) {
        return Err(ApiError::new(StatusCode::CONFLICT, "not_current_page", "only the current page can be saved"));
    }
    ctx.session.partial_answers.insert(req.page_index, req.answers);
    st.sessions.save_session(&ctx.session)?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- events ----

#[derive(Debug, Deserialize)]
pub struct EventIn {
    pub page_index: usize,
    pub kind: EventKind,
    #[serde(default)]
    pub slot_id: Option<String>,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
}

async fn log_event(State(st): St, Path(sid): Path<String>, Json(req): Json<EventIn>) -> ApiResult<Response> {
    let ctx = context(&st, &sid)?;
    let Some(page) = ctx.campaign.pages[ctx.rater].get(req.page_index) else {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", "page index out of range"));
    };
    if let Some(slot) = &req.slot_id {
        if page.slot(slot).is_none() {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", format!("no slot {slot} on this page")));
        }
    }
    let event = EventRecord {
        session_id: sid.clone(),
        page_index: req.page_index,
        kind: req.kind,
        slot_id: req.slot_id,
        timestamp: req.timestamp.map(|t| t.trunc_subsecs(3)).unwrap_or_else(now_millis),
    };
    match st.events.lock().await.append(event) {
        Ok(()) => Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true })))
            .into_response()),
        Err(mushra_core::Error::Constraint(m)) => Err(ApiError::new(StatusCode::CONFLICT, "out_of_order", m)),
        Err(e) => Err(e.into()),
    }
}

// ---- submission ----

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitBody {
    pub idempotency_token: String,
    /// slot id -> 0..100 (MUSHRA variants)
    #[serde(default)]
    pub scores: Option<BTreeMap<String, f64>>,
    /// slot id -> scoresheet (DG variants)
    #[serde(default)]
    pub sheets: Option<BTreeMap<String, Value>>,
    /// B relative to A, -3..+3 (CMOS)
    #[serde(default)]
    pub cmos: Option<f64>,
}

fn per_slot<'a, T>(
    page: &'a PageSpec,
    field: &str,
    answers: Option<&'a BTreeMap<String, T>>,
    errors: &mut Vec<ValidationError>,
) -> Vec<(&'a mushra_core::protocol::StimulusSlot, &'a T)> {
    let Some(answers) = answers else {
        errors.push(ValidationError::new(field, "missing"));
        return Vec::new();
    };
    for key in answers.keys() {
        if page.slot(key).is_none() {
            errors.push(ValidationError::new(format!("{field}.{key}"), "not a slot on this page"));
        }
    }
    page.slots
        .iter()
        .filter_map(|s| match answers.get(&s.slot_id) {
            Some(v) => Some((s, v)),
            None => {
                errors.push(ValidationError::new(format!("{field}.{}", s.slot_id), "missing"));
                None
            }
        })
        .collect()
}

fn build_records(
    c: &Campaign,
    rater: usize,
    page: &PageSpec,
    body: &SubmitBody,
    revised: &dyn Fn(&str) -> bool,
) -> Result<Vec<RatingRecord>, Vec<ValidationError>> {
    let plan = &c.plan;
    let now = now_millis();
    let base = |system_id: &str, slot_id: &str| RatingRecord {
        language: plan.language.clone(),
        variant: plan.variant,
        campaign_id: c.campaign_id.clone(),
        rater_id: Campaign::rater_id(rater),
        page_index: page.page_index,
        utterance_id: page.utterance_id.clone(),
        system_id: system_id.to_string(),
        slot_id: Some(slot_id.to_string()),
        score: None,
        dg: None,
        cmos: None,
        submitted_at: Some(now),
    };
    let mut errors = Vec::new();
    let mut out = Vec::new();
    match plan.variant {
        TestVariant::Cmos => {
            let system_side = page.slots.iter().position(|s| s.system_id != plan.baseline_label());
            match (body.cmos, system_side) {
                (None, _) => errors.push(ValidationError::new("cmos", "missing")),
                (Some(_), None) => errors.push(ValidationError::new("cmos", "page has no system side")),
                (Some(v), Some(side)) => match validate_cmos(v) {
                    Ok(answer) => {
                        // answers rate B against A; records favour the system when positive
                        let value = if side == 0 { answer.flipped() } else { answer };
                        let slot = &page.slots[side];
                        let mut r = base(&slot.system_id, &slot.slot_id);
                        r.cmos = Some(value);
                        out.push(r);
                    }
                    Err(mut e) => {
                        e.field = "cmos".into();
                        errors.push(e);
                    }
                },
            }
        }
        v if v.collects_scoresheets() => {
            for (slot, raw) in per_slot(page, "sheets", body.sheets.as_ref(), &mut errors) {
                let field = format!("sheets.{}", slot.slot_id);
                match serde_json::from_value::<DgScoresheet>(raw.clone()) {
                    Ok(mut sheet) => {
                        sheet.revised |= revised(&slot.slot_id);
                        match compute_dg_score(&sheet, &plan.dg_weights) {
                            Ok(breakdown) => {
                                let mut r = base(&slot.system_id, &slot.slot_id);
                                r.score = Some(Score::new(breakdown.clamped).expect("clamped score"));
                                r.dg = Some(DgEntry { sheet, breakdown });
                                out.push(r);
                            }
                            Err(e) => errors.push(ValidationError::new(format!("{field}.{}", e.field), e.reason)),
                        }
                    }
                    Err(e) => errors.push(ValidationError::new(field, e.to_string())),
                }
            }
        }
        _ => {
            for (slot, &v) in per_slot(page, "scores", body.scores.as_ref(), &mut errors) {
                match Score::checked(&format!("scores.{}", slot.slot_id), v) {
                    Ok(s) => {
                        let mut r = base(&slot.system_id, &slot.slot_id);
                        r.score = Some(Score::new(quantize_tenth(s.value())).expect("in range"));
                        out.push(r);
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

async fn submit_page(
    State(st): St,
    Path((sid, n)): Path<(String, usize)>,
    Json(body): Json<SubmitBody>,
) -> ApiResult<Json<Value>> {
    let lock = st.session_lock(&sid);
    let _guard = lock.lock().await;
    let Ctx {
        mut session,
        campaign,
        rater,
    } = context(&st, &sid)?;
    if body.idempotency_token.is_empty() {
        return Err(validation(vec![ValidationError::new("idempotency_token", "must not be empty")]));
    }
    if let Some(ack) = session.acknowledgements.get(&body.idempotency_token) {
        return Ok(Json(ack.clone()));
    }
    if !session.consent_given {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "consent_required", "no consent on record"));
    }
    if campaign.status != CampaignStatus::Live {
        return Err(ApiError::new(StatusCode::CONFLICT, "campaign_not_live", "this campaign is not accepting ratings"));
    }
    if n >= session.total_pages {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_page", format!("no page {n}")));
    }
    if session.completed_pages.contains(&n) {
        return Err(ApiError::new(StatusCode::CONFLICT, "already_submitted", format!("page {n} was already submitted")));
    }
    if session.next_page() != Some(n) {
        return Err(ApiError::new(StatusCode::CONFLICT, "not_current_page", "pages are submitted in order"));
    }
    let page = &campaign.pages[rater][n];

    let events = st.events.lock().await.read_session(&sid)?;
    let on_page = || events.iter().filter(|e| e.page_index == n);
    let played: BTreeSet<&str> = on_page()
        .filter(|e| e.kind == EventKind::PlayComplete)
        .filter_map(|e| e.slot_id.as_deref())
        .collect();
    let unplayed: Vec<&str> = page
        .slots
        .iter()
        .map(|s| s.slot_id.as_str())
        .filter(|s| !played.contains(s))
        .collect();
    if !unplayed.is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "playback_incomplete",
            "every sample must be played to the end before submitting",
        )
        .with("slots", json!(unplayed)));
    }
    let revisions: Vec<Option<&str>> = on_page()
        .filter(|e| e.kind == EventKind::Revision)
        .map(|e| e.slot_id.as_deref())
        .collect();
    let revised = |slot: &str| revisions.iter().any(|r| r.is_none() || *r == Some(slot));

    let records = build_records(&campaign, rater, page, &body, &revised).map_err(validation)?;
    {
        let rl = st.ratings_lock(&campaign.campaign_id);
        let _r = rl.lock().await;
        st.ratings_log(&campaign.campaign_id).append_all(&records)?;
    }
    session.completed_pages.insert(n);
    session.partial_answers.remove(&n);
    let ack = json!({
        "accepted": true,
        "session_id": sid,
        "page_index": n,
        "records": records.len(),
        "next_page": session.next_page(),
        "done": session.is_complete(),
    });
    session.acknowledgements.insert(body.idempotency_token.clone(), ack.clone());
    st.sessions.save_session(&session)?;

    let submit = EventRecord {
        session_id: sid.clone(),
        page_index: n,
        kind: EventKind::PageSubmit,
        slot_id: None,
        timestamp: now_millis(),
    };
    if let Err(e) = st.events.lock().await.append(submit) {
        log::warn!("session {sid}: page_submit event not logged: {e}");
    }
    Ok(Json(ack))
}

// ---- audio ----

async fn get_audio(State(st): St, Path(clip): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let audio = st
        .clip(&clip)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_clip", "no such clip"))?;
    let cache = st.anchors_dir();
    let bytes = tokio::task::spawn_blocking(move || audio::clip_bytes(&audio, &cache))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    Ok(audio::respond(bytes, &headers))
}

// ---- admin ----

fn campaign_sessions(st: &AppState, c: &Campaign) -> Vec<(usize, SessionState)> {
    c.invites
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let sid = st.session_for_invite(t)?;
            st.sessions.load_session(&sid).ok().map(|s| (i, s))
        })
        .collect()
}

fn campaign_records(st: &AppState, id: &str) -> ApiResult<Vec<RatingRecord>> {
    let mut seen = BTreeSet::new();
    Ok(st
        .ratings_log(id)
        .read_all()?
        .into_iter()
        .filter(|r| seen.insert(r.key()))
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub campaign_id: String,
    pub status: CampaignStatus,
    pub variant: TestVariant,
    pub raters: usize,
    pub sessions_started: usize,
    pub sessions_complete: usize,
    pub records: usize,
}

async fn admin_status(State(st): St, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<CampaignSummary>> {
    require_admin(&st, &headers)?;
    let c = campaign_or_404(&st, &id)?;
    let sessions = campaign_sessions(&st, &c);
    Ok(Json(CampaignSummary {
        campaign_id: c.campaign_id.clone(),
        status: c.status,
        variant: c.plan.variant,
        raters: c.invites.len(),
        sessions_started: sessions.len(),
        sessions_complete: sessions.iter().filter(|(_, s)| s.is_complete()).count(),
        records: campaign_records(&st, &id)?.len(),
    }))
}

#[derive(Debug, Deserialize)]
pub struct SetStatus {
    pub status: CampaignStatus,
}

async fn admin_set_status(
    State(st): St,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<SetStatus>,
) -> ApiResult<Json<Value>> {
    require_admin(&st, &headers)?;
    let _guard = st.campaign_lock.lock().await;
    let c = campaign_or_404(&st, &id)?;
    let allowed = matches!(
        (c.status, req.status),
        (CampaignStatus::Draft, CampaignStatus::Live)
            | (CampaignStatus::Live, CampaignStatus::Closed)
            | (CampaignStatus::Draft, CampaignStatus::Closed)
    ) || c.status == req.status;
    if !allowed {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "bad_transition",
            format!("cannot move from {:?} to {:?}", c.status, req.status),
        ));
    }
    let mut updated = (*c).clone();
    updated.status = req.status;
    st.store_campaign(updated)?;
    Ok(Json(json!({ "campaign_id": id, "status": req.status })))
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub format: Option<String>,
}

async fn admin_export(
    State(st): St,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    require_admin(&st, &headers)?;
    let c = campaign_or_404(&st, &id)?;
    let records = campaign_records(&st, &id)?;
    let mut body = Vec::new();
    let content_type = match q.format.as_deref().unwrap_or("csv") {
        "csv" => {
            export_csv(&records, &mut body)?;
            "text/csv"
        }
        "jsonl" => {
            export_jsonl(&records, &mut body)?;
            "application/x-ndjson"
        }
        other => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid", format!("unknown format {other:?}")))
        }
    };
    let status = if c.status == CampaignStatus::Closed { "complete" } else { "partial" };
    Ok((
        [
            (header::CONTENT_TYPE, content_type.to_string()),
            (header::HeaderName::from_static("x-export-status"), status.to_string()),
        ],
        body,
    )
        .into_response())
}

async fn admin_events(State(st): St, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    require_admin(&st, &headers)?;
    let c = campaign_or_404(&st, &id)?;
    let mut body = Vec::new();
    let events = st.events.lock().await;
    for (_, s) in campaign_sessions(&st, &c) {
        for e in events.read_session(&s.session_id)? {
            serde_json::to_writer(&mut body, &e).map_err(mushra_core::Error::from)?;
            body.push(b'\n');
        }
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// Per-page dwell times with audio durations, as JSON lines of `PageTiming`.
async fn admin_timings(State(st): St, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    require_admin(&st, &headers)?;
    let c = campaign_or_404(&st, &id)?;
    let sessions = campaign_sessions(&st, &c);
    let rater_of: HashMap<&str, usize> = sessions.iter().map(|(i, s)| (s.session_id.as_str(), *i)).collect();
    let mut events = Vec::new();
    {
        let log = st.events.lock().await;
        for (_, s) in &sessions {
            events.extend(log.read_session(&s.session_id)?);
        }
    }
    let (timings, warnings) = timings_from_events(&events, |sid, page| {
        let rater = *rater_of.get(sid)?;
        Some((c.plan.variant, c.page_audio_seconds(rater, page)?))
    });
    for w in warnings {
        log::warn!("{id}: {w}");
    }
    let mut body = Vec::new();
    for t in &timings {
        serde_json::to_writer(&mut body, t).map_err(mushra_core::Error::from)?;
        body.push(b'\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
