//! Listening-test toolkit for MUSHRA-family and CMOS speech evaluations.
//!
//! * [`scale`] and [`dg`]: the 0–100 scale, quality bins, CMOS grid and the
//!   MUSHRA-DG scoresheet score.
//! * [`protocol`]: blinded page assembly for every test variant, CMOS
//!   pairing, and Anchor-X degradation.
//! * [`screening`]: hidden-reference post-screening and threshold sweeps.
//! * [`analysis`]: summary tables, distributions, correlations,
//!   subsampling sensitivity, fault rates, CMOS preferences, timing and
//!   demographics.
//! * [`store`]: the flat rating schema, import/export, sessions and logs.

pub mod analysis;
pub mod dg;
pub mod error;
pub mod par;
pub mod protocol;
pub mod rng;
pub mod scale;
pub mod screening;
pub mod store;

pub use error::{Error, Result, ValidationError};
