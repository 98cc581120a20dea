use std::collections::HashMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::log::JsonlLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PageOpen,
    PlayStart,
    PlayComplete,
    SliderMove,
    PageSubmit,
    Revision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub session_id: String,
    pub page_index: usize,
    pub kind: EventKind,
    #[serde(default)]
    pub slot_id: Option<String>,
    pub timestamp: DateTime<Utc>,
}

/// Per-session append-only event logs under one directory.
#[derive(Debug)]
pub struct EventLog {
    dir: PathBuf,
    last: HashMap<String, DateTime<Utc>>,
}

impl EventLog {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(EventLog {
            dir,
            last: HashMap::new(),
        })
    }

    fn log(&self, session_id: &str) -> JsonlLog<EventRecord> {
        JsonlLog::new(self.dir.join(format!("{session_id}.jsonl")))
    }

    /// Appends an event; timestamps must not go backwards within a session.
    pub fn append(&mut self, event: EventRecord) -> Result<()> {
        let last = match self.last.get(&event.session_id) {
            Some(t) => Some(*t),
            None => self.read_session(&event.session_id)?.last().map(|e| e.timestamp),
        };
        if let Some(last) = last {
            if event.timestamp < last {
                return Err(Error::Constraint(format!(
                    "event timestamp {} precedes the previous event at {}",
                    event.timestamp, last
                )));
            }
        }
        self.log(&event.session_id).append(&event)?;
        self.last.insert(event.session_id.clone(), event.timestamp);
        Ok(())
    }

    pub fn read_session(&self, session_id: &str) -> Result<Vec<EventRecord>> {
        self.log(session_id).read_all()
    }

    pub fn read_all(&self) -> Result<Vec<EventRecord>> {
        let mut out = Vec::new();
        let mut names: Vec<_> = std::fs::read_dir(&self.dir)
            .map_err(|e| Error::io(&self.dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        names.sort();
        for path in names {
            out.extend(JsonlLog::<EventRecord>::new(path).read_all()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(kind: EventKind, ms: i64) -> EventRecord {
        EventRecord {
            session_id: "s1".into(),
            page_index: 0,
            kind,
            slot_id: None,
            timestamp: DateTime::from_timestamp_millis(ms).unwrap(),
        }
    }

    #[test]
    fn rejects_out_of_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = EventLog::open(dir.path()).unwrap();
        log.append(ev(EventKind::PageOpen, 1000)).unwrap();
        log.append(ev(EventKind::PageSubmit, 1000)).unwrap();
        assert!(log.append(ev(EventKind::Revision, 999)).is_err());
        // a fresh handle recovers the last timestamp from disk
        let mut reopened = EventLog::open(dir.path()).unwrap();
        assert!(reopened.append(ev(EventKind::Revision, 500)).is_err());
        assert_eq!(reopened.read_all().unwrap().len(), 2);
    }
}
