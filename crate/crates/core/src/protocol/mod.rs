//! Campaign assembly for every MUSHRA variant and CMOS, stimulus duration
//! checks, and Anchor-X construction.

mod anchor;
mod assemble;
mod audio;
mod plan;

pub use anchor::{make_anchor_x, Resampler, ANCHOR_X_RATE_HZ};
pub use assemble::{
    assemble_campaign, assemble_pages, pair_cmos, AudioCatalog, AudioRef, CmosPair, DirCatalog,
    MapCatalog, PageSpec, StimulusSlot, SLOT_ID_LEN,
};
pub use audio::{read_wav, validate_clip_duration, write_wav, AudioClip, DurationVerdict, WavFormat};
pub use plan::{
    AnchorSource, ShufflePolicy, SystemEntry, TestPlan, TestVariant, ANCHOR_LABEL, MAX_BLIND_SLOTS,
    REFERENCE_LABEL,
};
