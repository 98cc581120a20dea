//! Rater-facing JSON shapes. Nothing in here may carry a system id.

use mushra_core::dg::{CountAttribute, DgWeights, PerceptualAttribute};
use mushra_core::protocol::TestVariant;
use mushra_core::scale::CmosScore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPayload {
    pub slot_id: String,
    pub audio_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeField {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresheetSchema {
    pub counts: Vec<AttributeField>,
    pub perceptual: Vec<String>,
    pub weights: DgWeights,
}

impl ScoresheetSchema {
    pub fn new(weights: DgWeights) -> Self {
        ScoresheetSchema {
            counts: CountAttribute::ALL
                .iter()
                .map(|a| AttributeField {
                    name: a.name().into(),
                    description: a.description().into(),
                })
                .collect(),
            perceptual: PerceptualAttribute::ALL.iter().map(|a| a.name().into()).collect(),
            weights,
        }
    }
}

/// One page as served to a rater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PagePayload {
    pub done: bool,
    pub session_id: String,
    pub page_index: usize,
    pub total_pages: usize,
    pub completed_pages: usize,
    pub variant: TestVariant,
    pub guidelines: String,
    /// Blind slots in play order. For CMOS, `slots[0]` is A and `slots[1]` is B.
    pub slots: Vec<SlotPayload>,
    /// Absent on NMR and CMOS pages.
    pub reference_url: Option<String>,
    pub scoresheet: Option<ScoresheetSchema>,
    pub cmos_scale: Option<Vec<f64>>,
    /// Draft answers saved for this page, if any.
    pub partial_answers: Option<serde_json::Value>,
}

/// Returned instead of a page once nothing is left to rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DonePayload {
    pub done: bool,
    pub session_id: String,
    pub reason: String,
}

pub fn guidelines(variant: TestVariant) -> &'static str {
    match variant {
        TestVariant::Mushra | TestVariant::MushraExtended => {
            "Play the labelled reference and every sample to the end. Rate each sample from 0 (bad) to 100 \
             (excellent) against the reference. One of the samples is identical to the reference."
        }
        TestVariant::MushraNmr => {
            "Play every sample to the end. Rate how natural and clear each sample sounds, from 0 (bad) to 100 \
             (excellent)."
        }
        TestVariant::MushraDg => {
            "Play the labelled reference and every sample to the end. For each sample, count the errors you hear \
             and score liveliness, voice quality and rhythm from 0 to 100. The score is computed from your \
             answers; you may revise a sheet before confirming."
        }
        TestVariant::MushraDgNmr => {
            "Play every sample to the end. For each sample, count the errors you hear and score liveliness, \
             voice quality and rhythm from 0 to 100. The score is computed from your answers; you may revise a \
             sheet before confirming."
        }
        TestVariant::Cmos => {
            "Play both samples to the end. Rate sample B against sample A from -3 (A is much better) to +3 \
             (B is much better); 0 means both are equal."
        }
    }
}

pub fn cmos_scale() -> Vec<f64> {
    CmosScore::grid().map(CmosScore::value).collect()
}
