//! Frozen campaigns: assembled pages for every invite, clip tokens, and
//! audio durations.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use mushra_core::protocol::{
    assemble_campaign, read_wav, validate_clip_duration, AudioCatalog, AudioRef, DurationVerdict, PageSpec, TestPlan,
};
use mushra_core::par::Execution;
use mushra_core::rng;
use serde::{Deserialize, Serialize};

use crate::ServerError;

const CLIP_STREAM: u64 = 0xc11b;
const INVITE_STREAM: u64 = 0x1417;
pub const CLIP_TOKEN_LEN: usize = 16;
pub const INVITE_TOKEN_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignStatus {
    Draft,
    Live,
    Closed,
}

/// Clip tokens for one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageClips {
    /// slot id -> clip token
    pub slots: BTreeMap<String, String>,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub campaign_id: String,
    pub plan: TestPlan,
    pub seed: u64,
    pub status: CampaignStatus,
    pub created_at: DateTime<Utc>,
    /// Invite token per rater index.
    pub invites: Vec<String>,
    /// Page sequence per rater index.
    pub pages: Vec<Vec<PageSpec>>,
    pub page_clips: Vec<Vec<PageClips>>,
    pub clips: BTreeMap<String, AudioRef>,
    /// Seconds per source file.
    pub durations: BTreeMap<String, f64>,
}

pub fn valid_campaign_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Campaign {
    /// Assembles and freezes a campaign. Returns the campaign and any
    /// duration warnings.
    pub fn create(
        campaign_id: &str,
        plan: TestPlan,
        seed: u64,
        raters: usize,
        status: CampaignStatus,
        catalog: &dyn AudioCatalog,
    ) -> Result<(Campaign, Vec<String>), ServerError> {
        if !valid_campaign_id(campaign_id) {
            return Err(ServerError::Invalid(format!("invalid campaign id {campaign_id:?}")));
        }
        if raters == 0 {
            return Err(ServerError::Invalid("raters must be at least 1".into()));
        }
        let pages = assemble_campaign(&plan, catalog, seed, raters, Execution::default())?;

        let mut durations = BTreeMap::new();
        let mut warnings = Vec::new();
        for page in pages.iter().flatten() {
            let sources = page
                .slots
                .iter()
                .map(|s| &s.audio_ref)
                .chain(page.explicit_reference.as_ref());
            for audio in sources {
                let path = audio.source_path();
                if durations.contains_key(path) {
                    continue;
                }
                let (clip, _) = read_wav(Path::new(path))?;
                match validate_clip_duration(&clip) {
                    DurationVerdict::Ok => {}
                    DurationVerdict::Warning => {
                        warnings.push(format!("{path}: {:.2} s is above the nominal length", clip.duration()))
                    }
                    DurationVerdict::Error => {
                        return Err(ServerError::Invalid(format!(
                            "{path}: {:.2} s exceeds the maximum clip length",
                            clip.duration()
                        )))
                    }
                }
                durations.insert(path.to_string(), clip.duration());
            }
        }

        let id_stream = rng::str_stream(campaign_id);
        let mut invite_rng = rng::stream_rng(seed, &[INVITE_STREAM, id_stream]);
        let invites = (0..raters)
            .map(|_| rng::token(&mut invite_rng, INVITE_TOKEN_LEN))
            .collect();

        let mut clips = BTreeMap::new();
        let page_clips = pages
            .iter()
            .enumerate()
            .map(|(r, seq)| {
                seq.iter()
                    .map(|page| {
                        let mut rng = rng::stream_rng(seed, &[CLIP_STREAM, id_stream, r as u64, page.page_index as u64]);
                        let mut fresh = |audio: &AudioRef| loop {
                            let t = rng::token(&mut rng, CLIP_TOKEN_LEN);
                            if !clips.contains_key(&t) {
                                clips.insert(t.clone(), audio.clone());
                                break t;
                            }
                        };
                        PageClips {
                            slots: page
                                .slots
                                .iter()
                                .map(|s| (s.slot_id.clone(), fresh(&s.audio_ref)))
                                .collect(),
                            reference: page.explicit_reference.as_ref().map(&mut fresh),
                        }
                    })
                    .collect()
            })
            .collect();

        Ok((
            Campaign {
                campaign_id: campaign_id.to_string(),
                plan,
                seed,
                status,
                created_at: mushra_core::store::now_millis(),
                invites,
                pages,
                page_clips,
                clips,
                durations,
            },
            warnings,
        ))
    }

    pub fn rater_id(index: usize) -> String {
        format!("rater-{index}")
    }

    pub fn invite_index(&self, token: &str) -> Option<usize> {
        self.invites.iter().position(|t| t == token)
    }

    /// Total audio seconds on a page (blind slots plus explicit reference).
    pub fn page_audio_seconds(&self, rater: usize, page: usize) -> Option<f64> {
        let spec = self.pages.get(rater)?.get(page)?;
        spec.slots
            .iter()
            .map(|s| &s.audio_ref)
            .chain(spec.explicit_reference.as_ref())
            .map(|a| self.durations.get(a.source_path()).copied())
            .sum()
    }
}
