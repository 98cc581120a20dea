use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dg::DgWeights;
use crate::error::{Error, Result};

/// System label carried by hidden-reference slots and records.
pub const REFERENCE_LABEL: &str = "REF";
/// System label carried by anchor slots and records.
pub const ANCHOR_LABEL: &str = "ANC";
/// ITU-R guidance: at most 12 signals on one page.
pub const MAX_BLIND_SLOTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestVariant {
    Mushra,
    MushraNmr,
    MushraDg,
    MushraDgNmr,
    MushraExtended,
    Cmos,
}

impl TestVariant {
    pub const ALL: [TestVariant; 6] = [
        TestVariant::Mushra,
        TestVariant::MushraNmr,
        TestVariant::MushraDg,
        TestVariant::MushraDgNmr,
        TestVariant::MushraExtended,
        TestVariant::Cmos,
    ];

    /// NMR variants and CMOS never show a labelled reference.
    pub fn has_explicit_reference(self) -> bool {
        !matches!(
            self,
            TestVariant::MushraNmr | TestVariant::MushraDgNmr | TestVariant::Cmos
        )
    }

    pub fn collects_scoresheets(self) -> bool {
        matches!(self, TestVariant::MushraDg | TestVariant::MushraDgNmr)
    }

    pub fn is_cmos(self) -> bool {
        self == TestVariant::Cmos
    }

    pub fn allows_duplicate_systems(self) -> bool {
        self == TestVariant::MushraExtended
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestVariant::Mushra => "MUSHRA",
            TestVariant::MushraNmr => "MUSHRA_NMR",
            TestVariant::MushraDg => "MUSHRA_DG",
            TestVariant::MushraDgNmr => "MUSHRA_DG_NMR",
            TestVariant::MushraExtended => "MUSHRA_EXTENDED",
            TestVariant::Cmos => "CMOS",
        }
    }

    pub fn parse(s: &str) -> Option<TestVariant> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        TestVariant::ALL.into_iter().find(|v| v.as_str() == norm)
    }
}

impl fmt::Display for TestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A system under test. Written either as a bare id or as
/// `{"id": "VITS", "alias": "VITS-R"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemEntry {
    Id(String),
    Aliased { id: String, alias: Option<String> },
}

impl SystemEntry {
    pub fn id(&self) -> &str {
        match self {
            SystemEntry::Id(id) | SystemEntry::Aliased { id, .. } => id,
        }
    }

    pub fn alias(&self) -> Option<&str> {
        match self {
            SystemEntry::Id(_) => None,
            SystemEntry::Aliased { alias, .. } => alias.as_deref(),
        }
    }
}

impl From<&str> for SystemEntry {
    fn from(s: &str) -> Self {
        SystemEntry::Id(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSource {
    /// Pre-made anchor audio, looked up in the catalog under this system id.
    System(String),
    /// Anchor-X derived from the reference audio.
    #[default]
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShufflePolicy {
    pub pages: bool,
    pub slots: bool,
}

impl Default for ShufflePolicy {
    fn default() -> Self {
        ShufflePolicy {
            pages: true,
            slots: true,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub variant: TestVariant,
    pub systems: Vec<SystemEntry>,
    pub utterances: Vec<String>,
    #[serde(default = "default_true")]
    pub include_anchor: bool,
    #[serde(default)]
    pub anchor_source: AnchorSource,
    /// Catalog system id holding the ground-truth recordings (or the
    /// baseline system for CMOS head-to-head tests).
    pub reference_source: String,
    /// Label recorded for the CMOS baseline; defaults to `REF`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_label: Option<String>,
    /// Defaults to every utterance (or every pair for CMOS).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages_per_rater: Option<usize>,
    #[serde(default)]
    pub shuffle: ShufflePolicy,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub dg_weights: DgWeights,
}

impl TestPlan {
    pub fn new(
        variant: TestVariant,
        systems: &[&str],
        utterances: &[&str],
        reference_source: &str,
    ) -> Self {
        TestPlan {
            variant,
            systems: systems.iter().map(|&s| SystemEntry::from(s)).collect(),
            utterances: utterances.iter().map(|u| u.to_string()).collect(),
            include_anchor: true,
            anchor_source: AnchorSource::Generated,
            reference_source: reference_source.to_string(),
            baseline_label: None,
            pages_per_rater: None,
            shuffle: ShufflePolicy::default(),
            language: String::new(),
            dg_weights: DgWeights::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: TestPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    /// Hidden reference and anchor are not used by CMOS.
    pub fn includes_anchor(&self) -> bool {
        self.include_anchor && !self.variant.is_cmos()
    }

    pub fn blind_slot_count(&self) -> usize {
        if self.variant.is_cmos() {
            2
        } else {
            self.systems.len() + 1 + usize::from(self.includes_anchor())
        }
    }

    pub fn baseline_label(&self) -> &str {
        self.baseline_label.as_deref().unwrap_or(REFERENCE_LABEL)
    }

    /// Record labels for the plan systems. Duplicates without an explicit
    /// alias become `ID-R`, `ID-R2`, ...
    pub fn system_labels(&self) -> Vec<String> {
        let mut seen: Vec<&str> = Vec::new();
        self.systems
            .iter()
            .map(|entry| {
                let repeats = seen.iter().filter(|&&s| s == entry.id()).count();
                seen.push(entry.id());
                match (entry.alias(), repeats) {
                    (Some(alias), _) => alias.to_string(),
                    (None, 0) => entry.id().to_string(),
                    (None, 1) => format!("{}-R", entry.id()),
                    (None, n) => format!("{}-R{n}", entry.id()),
                }
            })
            .collect()
    }

    pub fn total_pages(&self) -> usize {
        if self.variant.is_cmos() {
            self.systems.len() * self.utterances.len()
        } else {
            self.utterances.len()
        }
    }

    pub fn pages_per_rater(&self) -> usize {
        self.pages_per_rater.unwrap_or_else(|| self.total_pages())
    }

    pub fn validate(&self) -> Result<()> {
        if self.systems.is_empty() {
            return Err(Error::Constraint("plan has no systems".into()));
        }
        if self.utterances.is_empty() {
            return Err(Error::Constraint("plan has no utterances".into()));
        }
        let mut utts = BTreeSet::new();
        for u in &self.utterances {
            if !utts.insert(u) {
                return Err(Error::Constraint(format!("duplicate utterance {u:?}")));
            }
        }
        if self.reference_source.is_empty() {
            return Err(Error::Constraint("reference_source is empty".into()));
        }

        let ids: BTreeSet<&str> = self.systems.iter().map(SystemEntry::id).collect();
        if ids.len() != self.systems.len() && !self.variant.allows_duplicate_systems() {
            return Err(Error::Constraint(format!(
                "duplicate systems are only allowed for {}",
                TestVariant::MushraExtended
            )));
        }
        let labels = self.system_labels();
        let mut seen = BTreeSet::new();
        for label in &labels {
            if label == REFERENCE_LABEL || label == ANCHOR_LABEL || label == self.baseline_label() {
                return Err(Error::Constraint(format!("system label {label:?} is reserved")));
            }
            if !seen.insert(label) {
                return Err(Error::Constraint(format!("system label {label:?} is not unique")));
            }
        }

        let slots = self.blind_slot_count();
        if slots > MAX_BLIND_SLOTS {
            return Err(Error::Constraint(format!(
                "{slots} blind slots per page exceeds the limit of {MAX_BLIND_SLOTS}"
            )));
        }
        let per_rater = self.pages_per_rater();
        if per_rater == 0 || per_rater > self.total_pages() {
            return Err(Error::Constraint(format!(
                "pages_per_rater {per_rater} must be in 1..={}",
                self.total_pages()
            )));
        }
        self.dg_weights.validate()?;
        Ok(())
    }
}
