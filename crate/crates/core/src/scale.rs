//! The 0–100 MUSHRA quality scale, its five labelled bins, and the
//! half-point CMOS grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// A rating on the continuous 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Score(f64);

impl Score {
    pub const MIN: f64 = 0.0;
    pub const MAX: f64 = 100.0;

    pub fn new(value: f64) -> Result<Self, ValidationError> {
        Self::checked("score", value)
    }

    /// Validates `value` and reports failures against `field`.
    pub fn checked(field: &str, value: f64) -> Result<Self, ValidationError> {
        if !value.is_finite() || !(Self::MIN..=Self::MAX).contains(&value) {
            return Err(ValidationError::new(field, format!("{value} out of [0,100]")));
        }
        Ok(Score(value))
    }

    /// Captured scores live on a 0.1 grid so exports are bit-stable.
    pub fn quantized(value: f64) -> Result<Self, ValidationError> {
        Self::new(value).map(|s| Score(quantize_tenth(s.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn bin(self) -> QualityBin {
        QualityBin::of(self)
    }
}

impl TryFrom<f64> for Score {
    type Error = ValidationError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Score::new(value)
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.0)
    }
}

/// Rounds to one decimal place.
pub fn quantize_tenth(value: f64) -> f64 {
    (value * 10.0).round() / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityBin {
    Bad,
    Poor,
    Fair,
    Good,
    Excellent,
}

impl QualityBin {
    pub const ALL: [QualityBin; 5] = [
        QualityBin::Bad,
        QualityBin::Poor,
        QualityBin::Fair,
        QualityBin::Good,
        QualityBin::Excellent,
    ];

    /// Boundary values belong to the upper bin.
    pub fn of(score: Score) -> QualityBin {
        let v = score.value();
        if v >= 80.0 {
            QualityBin::Excellent
        } else if v >= 60.0 {
            QualityBin::Good
        } else if v >= 40.0 {
            QualityBin::Fair
        } else if v >= 20.0 {
            QualityBin::Poor
        } else {
            QualityBin::Bad
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QualityBin::Bad => "Bad",
            QualityBin::Poor => "Poor",
            QualityBin::Fair => "Fair",
            QualityBin::Good => "Good",
            QualityBin::Excellent => "Excellent",
        }
    }

    /// Inclusive lower bound and exclusive upper bound (100 for the top bin).
    pub fn range(self) -> (f64, f64) {
        match self {
            QualityBin::Bad => (0.0, 20.0),
            QualityBin::Poor => (20.0, 40.0),
            QualityBin::Fair => (40.0, 60.0),
            QualityBin::Good => (60.0, 80.0),
            QualityBin::Excellent => (80.0, 100.0),
        }
    }
}

impl fmt::Display for QualityBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Bins a raw value, rejecting anything off the 0–100 scale.
pub fn bin_of(value: f64) -> Result<QualityBin, ValidationError> {
    Score::new(value).map(QualityBin::of)
}

/// A comparative score in [−3, +3] on a 0.5 grid.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CmosScore(f64);

impl CmosScore {
    pub fn new(value: f64) -> Result<Self, ValidationError> {
        validate_cmos(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Same magnitude, opposite preference.
    pub fn flipped(self) -> CmosScore {
        CmosScore(-self.0 + 0.0)
    }

    /// All 13 grid points in ascending order.
    pub fn grid() -> impl Iterator<Item = CmosScore> {
        (-6..=6).map(|half| CmosScore(f64::from(half) / 2.0))
    }
}

impl TryFrom<f64> for CmosScore {
    type Error = ValidationError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        validate_cmos(value)
    }
}

impl From<CmosScore> for f64 {
    fn from(s: CmosScore) -> f64 {
        s.0
    }
}

pub fn validate_cmos(value: f64) -> Result<CmosScore, ValidationError> {
    if !value.is_finite() || value.abs() > 3.0 {
        return Err(ValidationError::new("cmos", format!("{value} out of [-3,3]")));
    }
    let doubled = value * 2.0;
    if doubled.fract() != 0.0 {
        return Err(ValidationError::new(
            "cmos",
            format!("{value} is not a multiple of 0.5"),
        ));
    }
    // normalise -0.0
    Ok(CmosScore(value + 0.0))
}
