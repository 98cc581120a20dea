//! Rater session persistence.
//!
//! Each session is one file, `<id>.json`, whose first line is a SHA-256
//! digest of the JSON body on the second line. Saves go to a temporary
//! file that is fsynced and then renamed over the target, so a crash at any
//! point leaves either the previous or the new state on disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceDeclaration {
    Headphones,
    Loudspeakers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub rater_id: String,
    pub campaign_id: String,
    pub invite_token: String,
    pub consent_given: bool,
    pub consent_at: Option<DateTime<Utc>>,
    pub device: DeviceDeclaration,
    pub total_pages: usize,
    pub completed_pages: BTreeSet<usize>,
    /// Unsubmitted answers keyed by page index, opaque to the store.
    #[serde(default)]
    pub partial_answers: BTreeMap<usize, serde_json::Value>,
    /// Acknowledgements by idempotency token.
    #[serde(default)]
    pub acknowledgements: BTreeMap<String, serde_json::Value>,
}

impl SessionState {
    /// Lowest-index page not yet submitted.
    pub fn next_page(&self) -> Option<usize> {
        (0..self.total_pages).find(|p| !self.completed_pages.contains(p))
    }

    pub fn is_complete(&self) -> bool {
        self.next_page().is_none()
    }
}

/// Points at which a save can be interrupted in fault-injection tests.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectedFault {
    /// Crash after writing this many bytes of the temporary file.
    AfterTempBytes(usize),
    /// Crash after the temporary file is complete but before the rename.
    BeforeRename,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(SessionStore { dir })
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn temp_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!(".{id}.json.tmp"))
    }

    pub fn save_session(&self, state: &SessionState) -> Result<()> {
        self.save_with_fault(state, None)
    }

    #[doc(hidden)]
    pub fn save_with_fault(&self, state: &SessionState, fault: Option<InjectedFault>) -> Result<()> {
        let id = &state.session_id;
        if !valid_id(id) {
            return Err(Error::Config(format!("invalid session id {id:?}")));
        }
        let body = serde_json::to_vec(state)?;
        let mut contents = format!("sha256:{}\n", digest_hex(&body)).into_bytes();
        contents.extend_from_slice(&body);
        contents.push(b'\n');

        let tmp = self.temp_path(id);
        let crash = || {
            Error::io(
                &tmp,
                std::io::Error::new(std::io::ErrorKind::Interrupted, "injected crash"),
            )
        };
        let mut file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        match fault {
            Some(InjectedFault::AfterTempBytes(n)) if n < contents.len() => {
                file.write_all(&contents[..n]).map_err(|e| Error::io(&tmp, e))?;
                return Err(crash());
            }
            _ => file.write_all(&contents).map_err(|e| Error::io(&tmp, e))?,
        }
        file.sync_all().map_err(|e| Error::io(&tmp, e))?;
        drop(file);
        if fault == Some(InjectedFault::BeforeRename) {
            return Err(crash());
        }
        let target = self.path(id);
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
        sync_dir(&self.dir);
        Ok(())
    }

    pub fn load_session(&self, id: &str) -> Result<SessionState> {
        if !valid_id(id) {
            return Err(Error::NotFound(id.to_string()));
        }
        let path = self.path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(id.to_string()))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let integrity = |reason: &str| Error::Integrity {
            session: id.to_string(),
            reason: reason.to_string(),
        };
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| integrity("missing digest line"))?;
        let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| integrity("bad digest line"))?;
        let expected = header
            .strip_prefix("sha256:")
            .ok_or_else(|| integrity("bad digest line"))?;
        let body = bytes[newline + 1..]
            .strip_suffix(b"\n")
            .ok_or_else(|| integrity("truncated body"))?;
        if digest_hex(body) != expected {
            return Err(integrity("digest mismatch"));
        }
        let state: SessionState =
            serde_json::from_slice(body).map_err(|e| integrity(&e.to_string()))?;
        if state.session_id != id {
            return Err(integrity("session id mismatch"));
        }
        Ok(state)
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_id(id) && self.path(id).is_file()
    }

    /// Ids of every committed session.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))? {
            let entry = entry.map_err(|e| Error::io(&self.dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if valid_id(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn sync_dir(dir: &Path) {
    // best effort; not supported on every platform
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn state(id: &str, done: usize) -> SessionState {
        SessionState {
            session_id: id.to_string(),
            rater_id: "rater-1".into(),
            campaign_id: "c1".into(),
            invite_token: "tok".into(),
            consent_given: true,
            consent_at: Some(DateTime::from_timestamp_millis(1_700_000_000_000).unwrap()),
            device: DeviceDeclaration::Headphones,
            total_pages: 100,
            completed_pages: (0..done).collect(),
            partial_answers: BTreeMap::from([(done, serde_json::json!({"scores": {"abc": 42.0}}))]),
            acknowledgements: BTreeMap::new(),
        }
    }

    #[test]
    fn round_trip_and_progress() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = state("s1", 40);
        store.save_session(&s).unwrap();
        let back = store.load_session("s1").unwrap();
        assert_eq!(back, s);
        assert_eq!(back.next_page(), Some(40));
        assert_eq!(store.list().unwrap(), vec!["s1"]);
    }

    #[test]
    fn unknown_and_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.load_session("nope"), Err(Error::NotFound(_))));
        assert!(matches!(store.load_session("../x"), Err(Error::NotFound(_))));
        store.save_session(&state("s2", 1)).unwrap();
        let path = dir.path().join("s2.json");
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 5] ^= 0x01;
        fs::write(&path, bytes).unwrap();
        match store.load_session("s2") {
            Err(Error::Integrity { session, .. }) => assert_eq!(session, "s2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interrupted_save_keeps_previous_state() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let first = state("s3", 10);
        store.save_session(&first).unwrap();
        let second = state("s3", 11);
        for fault in [InjectedFault::AfterTempBytes(0), InjectedFault::AfterTempBytes(30), InjectedFault::BeforeRename] {
            assert!(store.save_with_fault(&second, Some(fault)).is_err());
            assert_eq!(store.load_session("s3").unwrap(), first);
        }
        store.save_session(&second).unwrap();
        assert_eq!(store.load_session("s3").unwrap(), second);
    }
}
