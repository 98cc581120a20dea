use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::plan::{AnchorSource, TestPlan, ANCHOR_LABEL, REFERENCE_LABEL};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng;

pub const SLOT_ID_LEN: usize = 8;

// stream tags
const PAGE_ORDER: u64 = 1;
const SLOT_ORDER: u64 = 2;
const CMOS_SIDE: u64 = 3;

/// Resolves `(system, utterance)` to an audio location.
pub trait AudioCatalog: Sync {
    fn locate(&self, system: &str, utterance: &str) -> Option<String>;
}

impl<F> AudioCatalog for F
where
    F: Fn(&str, &str) -> Option<String> + Sync,
{
    fn locate(&self, system: &str, utterance: &str) -> Option<String> {
        self(system, utterance)
    }
}

/// `root/<system>/<utterance>.wav`
#[derive(Debug, Clone)]
pub struct DirCatalog {
    pub root: PathBuf,
}

impl DirCatalog {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirCatalog { root: root.into() }
    }
}

impl AudioCatalog for DirCatalog {
    fn locate(&self, system: &str, utterance: &str) -> Option<String> {
        let path = self.root.join(system).join(format!("{utterance}.wav"));
        path.is_file().then(|| path.to_string_lossy().into_owned())
    }
}

/// In-memory catalog, mostly for tests and dry runs.
#[derive(Debug, Clone, Default)]
pub struct MapCatalog(pub BTreeMap<(String, String), String>);

impl MapCatalog {
    /// Every system × utterance, with locations `system/utterance.wav`.
    pub fn complete<S: AsRef<str>, U: AsRef<str>>(systems: &[S], utterances: &[U]) -> Self {
        let mut map = BTreeMap::new();
        for s in systems {
            for u in utterances {
                let (s, u) = (s.as_ref(), u.as_ref());
                map.insert((s.to_string(), u.to_string()), format!("{s}/{u}.wav"));
            }
        }
        MapCatalog(map)
    }
}

impl AudioCatalog for MapCatalog {
    fn locate(&self, system: &str, utterance: &str) -> Option<String> {
        self.0.get(&(system.to_string(), utterance.to_string())).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioRef {
    File(String),
    /// Anchor-X rendering of the given reference file.
    AnchorXOf(String),
}

impl AudioRef {
    pub fn source_path(&self) -> &str {
        match self {
            AudioRef::File(p) | AudioRef::AnchorXOf(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusSlot {
    pub slot_id: String,
    pub audio_ref: AudioRef,
    /// Server-side only.
    pub system_id: String,
    pub is_hidden_reference: bool,
    pub is_anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSpec {
    pub page_index: usize,
    pub utterance_id: String,
    pub slots: Vec<StimulusSlot>,
    pub explicit_reference: Option<AudioRef>,
}

impl PageSpec {
    pub fn slot(&self, slot_id: &str) -> Option<&StimulusSlot> {
        self.slots.iter().find(|s| s.slot_id == slot_id)
    }

    pub fn hidden_reference(&self) -> Option<&StimulusSlot> {
        self.slots.iter().find(|s| s.is_hidden_reference)
    }
}

/// A blinded A/B comparison; `pair.slots[0]` plays as A, `[1]` as B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmosPair {
    pub page: PageSpec,
    pub system_id: String,
    pub baseline_id: String,
    pub system_is_a: bool,
}

struct Unplaced {
    system_id: String,
    audio_ref: AudioRef,
    is_hidden_reference: bool,
    is_anchor: bool,
}

fn check_audio(plan: &TestPlan, catalog: &dyn AudioCatalog) -> Result<()> {
    let mut sources: BTreeSet<&str> = plan.systems.iter().map(|s| s.id()).collect();
    sources.insert(&plan.reference_source);
    if let (true, AnchorSource::System(anchor)) = (plan.includes_anchor(), &plan.anchor_source) {
        sources.insert(anchor);
    }
    let missing: Vec<(String, String)> = sources
        .iter()
        .flat_map(|&s| plan.utterances.iter().map(move |u| (s, u)))
        .filter(|(s, u)| catalog.locate(s, u).is_none())
        .map(|(s, u)| (s.to_string(), u.clone()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingAudio(missing))
    }
}

fn locate(catalog: &dyn AudioCatalog, system: &str, utterance: &str) -> String {
    catalog
        .locate(system, utterance)
        .expect("audio presence checked before assembly")
}

fn place_slots(unplaced: Vec<Unplaced>, shuffle: bool, seed: u64, stream: &[u64]) -> Vec<StimulusSlot> {
    let mut rng = rng::stream_rng(seed, stream);
    let mut unplaced = unplaced;
    if shuffle {
        unplaced.shuffle(&mut rng);
    }
    let mut used = BTreeSet::new();
    unplaced
        .into_iter()
        .map(|u| {
            let slot_id = loop {
                let t = rng::token(&mut rng, SLOT_ID_LEN);
                if used.insert(t.clone()) {
                    break t;
                }
            };
            StimulusSlot {
                slot_id,
                audio_ref: u.audio_ref,
                system_id: u.system_id,
                is_hidden_reference: u.is_hidden_reference,
                is_anchor: u.is_anchor,
            }
        })
        .collect()
}

fn page_order(plan: &TestPlan, count: usize, seed: u64, rater: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    if plan.shuffle.pages {
        order.shuffle(&mut rng::stream_rng(seed, &[PAGE_ORDER, rater]));
    }
    order.truncate(plan.pages_per_rater());
    order
}

/// Builds the page sequence seen by one rater.
///
/// Each page holds one blind slot per plan system, the hidden reference,
/// and the anchor when enabled. Page order and slot order are drawn from
/// streams keyed by `(seed, rater)` and `(seed, rater, utterance)`.
pub fn assemble_pages(
    plan: &TestPlan,
    catalog: &dyn AudioCatalog,
    seed: u64,
    rater: u64,
) -> Result<Vec<PageSpec>> {
    plan.validate()?;
    if plan.variant.is_cmos() {
        return Ok(pair_cmos(plan, catalog, seed, rater)?
            .into_iter()
            .map(|p| p.page)
            .collect());
    }
    check_audio(plan, catalog)?;
    let labels = plan.system_labels();

    let pages = page_order(plan, plan.utterances.len(), seed, rater)
        .into_iter()
        .enumerate()
        .map(|(page_index, u)| {
            let utt = &plan.utterances[u];
            let reference = locate(catalog, &plan.reference_source, utt);
            let mut unplaced: Vec<Unplaced> = plan
                .systems
                .iter()
                .zip(&labels)
                .map(|(entry, label)| Unplaced {
                    system_id: label.clone(),
                    audio_ref: AudioRef::File(locate(catalog, entry.id(), utt)),
                    is_hidden_reference: false,
                    is_anchor: false,
                })
                .collect();
            unplaced.push(Unplaced {
                system_id: REFERENCE_LABEL.to_string(),
                audio_ref: AudioRef::File(reference.clone()),
                is_hidden_reference: true,
                is_anchor: false,
            });
            if plan.includes_anchor() {
                let audio_ref = match &plan.anchor_source {
                    AnchorSource::System(s) => AudioRef::File(locate(catalog, s, utt)),
                    AnchorSource::Generated => AudioRef::AnchorXOf(reference.clone()),
                };
                unplaced.push(Unplaced {
                    system_id: ANCHOR_LABEL.to_string(),
                    audio_ref,
                    is_hidden_reference: false,
                    is_anchor: true,
                });
            }
            let stream = [SLOT_ORDER, rater, rng::str_stream(utt)];
            PageSpec {
                page_index,
                utterance_id: utt.clone(),
                slots: place_slots(unplaced, plan.shuffle.slots, seed, &stream),
                explicit_reference: plan
                    .variant
                    .has_explicit_reference()
                    .then(|| AudioRef::File(reference)),
            }
        })
        .collect();
    Ok(pages)
}

/// Page sequences for `raters` raters, assembled in parallel.
pub fn assemble_campaign(
    plan: &TestPlan,
    catalog: &dyn AudioCatalog,
    seed: u64,
    raters: usize,
    exec: Execution,
) -> Result<Vec<Vec<PageSpec>>> {
    plan.validate()?;
    par::map_range(raters, exec, |r| assemble_pages(plan, catalog, seed, r as u64))
        .into_iter()
        .collect()
}

/// Blinded A/B pairs: one per (system, utterance), each comparing the
/// system against the plan's baseline. Which side plays as A is drawn per
/// pair from the seed.
pub fn pair_cmos(
    plan: &TestPlan,
    catalog: &dyn AudioCatalog,
    seed: u64,
    rater: u64,
) -> Result<Vec<CmosPair>> {
    if !plan.variant.is_cmos() {
        return Err(Error::Constraint(format!(
            "pair_cmos requires a CMOS plan, got {}",
            plan.variant
        )));
    }
    plan.validate()?;
    check_audio(plan, catalog)?;
    let labels = plan.system_labels();
    let combos: Vec<(usize, usize)> = (0..plan.systems.len())
        .flat_map(|s| (0..plan.utterances.len()).map(move |u| (s, u)))
        .collect();

    let pairs = page_order(plan, combos.len(), seed, rater)
        .into_iter()
        .enumerate()
        .map(|(page_index, c)| {
            let (s, u) = combos[c];
            let utt = &plan.utterances[u];
            let system = Unplaced {
                system_id: labels[s].clone(),
                audio_ref: AudioRef::File(locate(catalog, plan.systems[s].id(), utt)),
                is_hidden_reference: false,
                is_anchor: false,
            };
            let baseline = Unplaced {
                system_id: plan.baseline_label().to_string(),
                audio_ref: AudioRef::File(locate(catalog, &plan.reference_source, utt)),
                is_hidden_reference: false,
                is_anchor: false,
            };
            let stream = [CMOS_SIDE, rater, rng::str_stream(utt), s as u64];
            let mut side_rng = rng::stream_rng(seed, &stream);
            let system_is_a = rand::Rng::random_bool(&mut side_rng, 0.5);
            let ordered = if system_is_a {
                vec![system, baseline]
            } else {
                vec![baseline, system]
            };
            CmosPair {
                page: PageSpec {
                    page_index,
                    utterance_id: utt.clone(),
                    slots: place_slots(ordered, false, seed, &stream),
                    explicit_reference: None,
                },
                system_id: labels[s].clone(),
                baseline_id: plan.baseline_label().to_string(),
                system_is_a,
            }
        })
        .collect();
    Ok(pairs)
}
