use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use crate::dg::{DgScoresheet, ScoreBreakdown};
use crate::error::ValidationError;
use crate::protocol::TestVariant;
use crate::scale::{CmosScore, Score};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgEntry {
    pub sheet: DgScoresheet,
    pub breakdown: ScoreBreakdown,
}

/// One rater's rating of one stimulus on one page.
///
/// MUSHRA-family records carry `score`; CMOS records carry `cmos`, oriented
/// so that positive values favour `system_id` over the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub language: String,
    pub variant: TestVariant,
    pub campaign_id: String,
    pub rater_id: String,
    pub page_index: usize,
    pub utterance_id: String,
    pub system_id: String,
    #[serde(default)]
    pub slot_id: Option<String>,
    #[serde(default)]
    pub score: Option<Score>,
    #[serde(default)]
    pub dg: Option<DgEntry>,
    #[serde(default)]
    pub cmos: Option<CmosScore>,
    #[serde(default)]
    pub submitted_at: Option<DateTime<Utc>>,
}

/// Uniqueness key within a dataset.
pub type RecordKey = (String, String, usize, String);

impl RatingRecord {
    pub fn key(&self) -> RecordKey {
        (
            self.campaign_id.clone(),
            self.rater_id.clone(),
            self.page_index,
            self.system_id.clone(),
        )
    }

    /// The numeric value analysed by default: the MUSHRA score, or the CMOS
    /// value for comparison records.
    pub fn value(&self) -> f64 {
        match (self.score, self.cmos) {
            (Some(s), _) => s.value(),
            (None, Some(c)) => c.value(),
            (None, None) => f64::NAN,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        for (field, v) in [
            ("rater_id", &self.rater_id),
            ("utterance_id", &self.utterance_id),
            ("system_id", &self.system_id),
        ] {
            if v.is_empty() {
                return Err(ValidationError::new(field, "must not be empty"));
            }
        }
        match (self.variant.is_cmos(), self.score.is_some(), self.cmos.is_some()) {
            (true, false, true) | (false, true, false) => {}
            (true, _, _) => {
                return Err(ValidationError::new(
                    "cmos",
                    "CMOS records carry exactly a cmos value",
                ))
            }
            (false, _, _) => {
                return Err(ValidationError::new(
                    "score",
                    "MUSHRA records carry exactly a score",
                ))
            }
        }
        if let Some(s) = self.score {
            Score::new(s.value())?;
        }
        if let Some(dg) = &self.dg {
            if !self.variant.collects_scoresheets() {
                return Err(ValidationError::new(
                    "dg",
                    format!("scoresheet on a {} record", self.variant),
                ));
            }
            dg.sheet.validate()?;
        }
        Ok(())
    }
}

/// Current UTC time truncated to milliseconds.
pub fn now_millis() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(3)
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}
