use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use mushra_core::protocol::AudioRef;
use mushra_core::store::{EventLog, JsonlLog, RatingRecord, SessionStore};

use crate::campaign::Campaign;
use crate::config::Config;
use crate::ServerError;

type AsyncLock = Arc<tokio::sync::Mutex<()>>;

/// Shared server state. Campaigns are immutable apart from their status;
/// per-session work is serialised through `session_lock`.
pub struct AppState {
    pub config: Config,
    campaigns: RwLock<HashMap<String, Arc<Campaign>>>,
    clips: RwLock<HashMap<String, AudioRef>>,
    /// invite token -> (campaign id, rater index)
    invites: RwLock<HashMap<String, (String, usize)>>,
    /// invite token -> session id
    invite_sessions: Mutex<HashMap<String, String>>,
    pub sessions: SessionStore,
    pub events: tokio::sync::Mutex<EventLog>,
    session_locks: Mutex<HashMap<String, AsyncLock>>,
    ratings_locks: Mutex<HashMap<String, AsyncLock>>,
    /// Serialises campaign creation and status changes.
    pub campaign_lock: tokio::sync::Mutex<()>,
}

fn lock_for(map: &Mutex<HashMap<String, AsyncLock>>, key: &str) -> AsyncLock {
    map.lock()
        .expect("lock map poisoned")
        .entry(key.to_string())
        .or_default()
        .clone()
}

impl AppState {
    /// Opens (or creates) the data directory and loads every campaign and
    /// session found there.
    pub fn open(config: Config) -> Result<AppState, ServerError> {
        let data = config.data_dir.clone();
        for sub in ["campaigns", "ratings", "anchors"] {
            let d = data.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| mushra_core::Error::io(&d, e))?;
        }
        let state = AppState {
            sessions: SessionStore::open(data.join("sessions"))?,
            events: tokio::sync::Mutex::new(EventLog::open(data.join("events"))?),
            config,
            campaigns: RwLock::default(),
            clips: RwLock::default(),
            invites: RwLock::default(),
            invite_sessions: Mutex::default(),
            session_locks: Mutex::default(),
            ratings_locks: Mutex::default(),
            campaign_lock: tokio::sync::Mutex::new(()),
        };
        state.load()?;
        Ok(state)
    }

    fn campaigns_dir(&self) -> PathBuf {
        self.config.data_dir.join("campaigns")
    }

    pub fn anchors_dir(&self) -> PathBuf {
        self.config.data_dir.join("anchors")
    }

    pub fn ratings_log(&self, campaign_id: &str) -> JsonlLog<RatingRecord> {
        JsonlLog::new(self.config.data_dir.join("ratings").join(format!("{campaign_id}.jsonl")))
    }

    fn load(&self) -> Result<(), ServerError> {
        let dir = self.campaigns_dir();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| mushra_core::Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|e| mushra_core::Error::io(&path, e))?;
            let campaign: Campaign = serde_json::from_str(&text).map_err(mushra_core::Error::from)?;
            self.index(campaign);
        }
        for id in self.sessions.list()? {
            match self.sessions.load_session(&id) {
                Ok(s) => {
                    self.invite_sessions
                        .lock()
                        .unwrap()
                        .insert(s.invite_token.clone(), s.session_id.clone());
                }
                Err(e) => log::error!("skipping session {id}: {e}"),
            }
        }
        self.reconcile()
    }

    /// A crash between appending ratings and saving the session leaves
    /// pages rated but not marked complete; mark them now.
    fn reconcile(&self) -> Result<(), ServerError> {
        let campaigns: Vec<Arc<Campaign>> = self.campaigns.read().unwrap().values().cloned().collect();
        for c in campaigns {
            let records = self.ratings_log(&c.campaign_id).read_all()?;
            if records.is_empty() {
                continue;
            }
            let rated: BTreeSet<(&str, usize)> =
                records.iter().map(|r| (r.rater_id.as_str(), r.page_index)).collect();
            for (idx, invite) in c.invites.iter().enumerate() {
                let Some(sid) = self.session_for_invite(invite) else { continue };
                let mut s = self.sessions.load_session(&sid)?;
                let rater = Campaign::rater_id(idx);
                let missing: Vec<usize> = rated
                    .iter()
                    .filter(|(r, p)| *r == rater && !s.completed_pages.contains(p))
                    .map(|&(_, p)| p)
                    .collect();
                if !missing.is_empty() {
                    log::warn!("session {sid}: recovering pages {missing:?} from the ratings log");
                    for p in missing {
                        s.completed_pages.insert(p);
                        s.partial_answers.remove(&p);
                    }
                    self.sessions.save_session(&s)?;
                }
            }
        }
        Ok(())
    }

    fn index(&self, campaign: Campaign) {
        {
            let mut clips = self.clips.write().unwrap();
            for (k, v) in &campaign.clips {
                clips.insert(k.clone(), v.clone());
            }
        }
        {
            let mut invites = self.invites.write().unwrap();
            for (i, t) in campaign.invites.iter().enumerate() {
                invites.insert(t.clone(), (campaign.campaign_id.clone(), i));
            }
        }
        self.campaigns
            .write()
            .unwrap()
            .insert(campaign.campaign_id.clone(), Arc::new(campaign));
    }

    /// Writes the campaign file atomically and publishes it.
    pub fn store_campaign(&self, campaign: Campaign) -> Result<(), ServerError> {
        let path = self.campaigns_dir().join(format!("{}.json", campaign.campaign_id));
        write_atomic(&path, &serde_json::to_vec(&campaign).map_err(mushra_core::Error::from)?)?;
        self.index(campaign);
        Ok(())
    }

    pub fn campaign(&self, id: &str) -> Option<Arc<Campaign>> {
        self.campaigns.read().unwrap().get(id).cloned()
    }

    pub fn clip(&self, token: &str) -> Option<AudioRef> {
        self.clips.read().unwrap().get(token).cloned()
    }

    pub fn invite(&self, token: &str) -> Option<(String, usize)> {
        self.invites.read().unwrap().get(token).cloned()
    }

    pub fn session_for_invite(&self, token: &str) -> Option<String> {
        self.invite_sessions.lock().unwrap().get(token).cloned()
    }

    pub fn bind_invite(&self, token: &str, session_id: &str) {
        self.invite_sessions
            .lock()
            .unwrap()
            .insert(token.to_string(), session_id.to_string());
    }

    pub fn session_lock(&self, session_id: &str) -> AsyncLock {
        lock_for(&self.session_locks, session_id)
    }

    pub fn ratings_lock(&self, campaign_id: &str) -> AsyncLock {
        lock_for(&self.ratings_locks, campaign_id)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServerError> {
    use std::io::Write;
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| mushra_core::Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| mushra_core::Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| mushra_core::Error::io(path, e))?;
    Ok(())
}
