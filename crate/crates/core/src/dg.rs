//! Fine-grained MUSHRA-DG scoresheets and the analytic score that
//! combines them.
//!
//! A rater marks six error counts and three perceptual scores; the final
//! score is the mean perceptual score minus per-occurrence penalties, with
//! mild and severe pronunciation mistakes saturating at a cap.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::scale::{quantize_tenth, Score};

/// Error counts (by attribute) plus perceptual scores for one stimulus.
///
/// `us` aggregates unnatural pauses, speed-ups and slow-downs into one count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScoresheet")]
pub struct DgScoresheet {
    pub mp: u32,
    pub sp: u32,
    pub us: u32,
    pub da: u32,
    pub sef: u32,
    pub ws: u32,
    pub liveliness: f64,
    pub voice_quality: f64,
    pub rhythm: f64,
    #[serde(default)]
    pub revised: bool,
}

/// Objective (count) attributes in scoresheet order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountAttribute {
    Mp,
    Sp,
    Us,
    Da,
    Sef,
    Ws,
}

impl CountAttribute {
    pub const ALL: [CountAttribute; 6] = [
        CountAttribute::Mp,
        CountAttribute::Sp,
        CountAttribute::Us,
        CountAttribute::Da,
        CountAttribute::Sef,
        CountAttribute::Ws,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CountAttribute::Mp => "mp",
            CountAttribute::Sp => "sp",
            CountAttribute::Us => "us",
            CountAttribute::Da => "da",
            CountAttribute::Sef => "sef",
            CountAttribute::Ws => "ws",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CountAttribute::Mp => "mild pronunciation mistakes",
            CountAttribute::Sp => "severe pronunciation mistakes",
            CountAttribute::Us => "unnatural pauses, speed-ups or slow-downs",
            CountAttribute::Da => "digital artifacts",
            CountAttribute::Sef => "sudden energy fluctuations",
            CountAttribute::Ws => "word skips",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptualAttribute {
    Liveliness,
    VoiceQuality,
    Rhythm,
}

impl PerceptualAttribute {
    pub const ALL: [PerceptualAttribute; 3] = [
        PerceptualAttribute::Liveliness,
        PerceptualAttribute::VoiceQuality,
        PerceptualAttribute::Rhythm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerceptualAttribute::Liveliness => "liveliness",
            PerceptualAttribute::VoiceQuality => "voice_quality",
            PerceptualAttribute::Rhythm => "rhythm",
        }
    }
}

impl DgScoresheet {
    /// A sheet with no errors and the given perceptual scores.
    pub fn clean(liveliness: f64, voice_quality: f64, rhythm: f64) -> Self {
        DgScoresheet {
            mp: 0,
            sp: 0,
            us: 0,
            da: 0,
            sef: 0,
            ws: 0,
            liveliness,
            voice_quality,
            rhythm,
            revised: false,
        }
    }

    pub fn count(&self, attr: CountAttribute) -> u32 {
        match attr {
            CountAttribute::Mp => self.mp,
            CountAttribute::Sp => self.sp,
            CountAttribute::Us => self.us,
            CountAttribute::Da => self.da,
            CountAttribute::Sef => self.sef,
            CountAttribute::Ws => self.ws,
        }
    }

    pub fn count_mut(&mut self, attr: CountAttribute) -> &mut u32 {
        match attr {
            CountAttribute::Mp => &mut self.mp,
            CountAttribute::Sp => &mut self.sp,
            CountAttribute::Us => &mut self.us,
            CountAttribute::Da => &mut self.da,
            CountAttribute::Sef => &mut self.sef,
            CountAttribute::Ws => &mut self.ws,
        }
    }

    pub fn perceptual(&self, attr: PerceptualAttribute) -> f64 {
        match attr {
            PerceptualAttribute::Liveliness => self.liveliness,
            PerceptualAttribute::VoiceQuality => self.voice_quality,
            PerceptualAttribute::Rhythm => self.rhythm,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        for attr in PerceptualAttribute::ALL {
            Score::checked(attr.name(), self.perceptual(attr))?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawScoresheet {
    mp: i64,
    sp: i64,
    us: i64,
    da: i64,
    sef: i64,
    ws: i64,
    liveliness: f64,
    voice_quality: f64,
    rhythm: f64,
    #[serde(default)]
    revised: bool,
}

impl TryFrom<RawScoresheet> for DgScoresheet {
    type Error = ValidationError;

    fn try_from(raw: RawScoresheet) -> Result<Self, Self::Error> {
        let count = |field: &str, v: i64| {
            u32::try_from(v)
                .map_err(|_| ValidationError::new(field, format!("count {v} must be a non-negative integer")))
        };
        let perceptual = |field: &str, v: f64| Score::checked(field, v).map(|s| quantize_tenth(s.value()));
        Ok(DgScoresheet {
            mp: count("mp", raw.mp)?,
            sp: count("sp", raw.sp)?,
            us: count("us", raw.us)?,
            da: count("da", raw.da)?,
            sef: count("sef", raw.sef)?,
            ws: count("ws", raw.ws)?,
            liveliness: perceptual("liveliness", raw.liveliness)?,
            voice_quality: perceptual("voice_quality", raw.voice_quality)?,
            rhythm: perceptual("rhythm", raw.rhythm)?,
            revised: raw.revised,
        })
    }
}

/// Points deducted per occurrence, and the saturation caps for
/// pronunciation mistakes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgWeights {
    pub mp_penalty: f64,
    pub sp_penalty: f64,
    pub us_penalty: f64,
    pub da_penalty: f64,
    pub sef_penalty: f64,
    pub ws_penalty: f64,
    pub mp_cap: u32,
    pub sp_cap: u32,
}

impl Default for DgWeights {
    fn default() -> Self {
        DgWeights {
            mp_penalty: 5.0,
            sp_penalty: 10.0,
            us_penalty: 5.0,
            da_penalty: 5.0,
            sef_penalty: 5.0,
            ws_penalty: 25.0,
            mp_cap: 15,
            sp_cap: 7,
        }
    }
}

impl DgWeights {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let penalties = [
            ("mp_penalty", self.mp_penalty),
            ("sp_penalty", self.sp_penalty),
            ("us_penalty", self.us_penalty),
            ("da_penalty", self.da_penalty),
            ("sef_penalty", self.sef_penalty),
            ("ws_penalty", self.ws_penalty),
        ];
        for (field, p) in penalties {
            if !p.is_finite() || p < 0.0 {
                return Err(ValidationError::new(field, format!("penalty {p} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn penalty(&self, attr: CountAttribute) -> f64 {
        match attr {
            CountAttribute::Mp => self.mp_penalty,
            CountAttribute::Sp => self.sp_penalty,
            CountAttribute::Us => self.us_penalty,
            CountAttribute::Da => self.da_penalty,
            CountAttribute::Sef => self.sef_penalty,
            CountAttribute::Ws => self.ws_penalty,
        }
    }

    /// Occurrences that are actually penalised for `attr`.
    pub fn counted(&self, attr: CountAttribute, count: u32) -> u32 {
        match attr {
            CountAttribute::Mp => count.min(self.mp_cap),
            CountAttribute::Sp => count.min(self.sp_cap),
            _ => count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub perceptual_mean: f64,
    pub total_penalty: f64,
    /// Unclamped; negative when penalties exceed the perceptual mean.
    pub raw: f64,
    pub clamped: f64,
}

/// Computes the MUSHRA-DG score of a scoresheet.
///
/// Perceptual scores are read at 0.1 resolution. The raw value is formed as
/// `(sum_of_tenths - 30 * penalty) / 30` so that a single rounding occurs;
/// for grid inputs and integral weights it is the correctly rounded exact
/// result.
pub fn compute_dg_score(
    sheet: &DgScoresheet,
    weights: &DgWeights,
) -> Result<ScoreBreakdown, ValidationError> {
    sheet.validate()?;
    weights.validate()?;

    let tenths: f64 = PerceptualAttribute::ALL
        .iter()
        .map(|&a| (sheet.perceptual(a) * 10.0).round())
        .sum();
    let total_penalty: f64 = CountAttribute::ALL
        .iter()
        .map(|&a| f64::from(weights.counted(a, sheet.count(a))) * weights.penalty(a))
        .sum();

    let raw = (tenths - 30.0 * total_penalty) / 30.0;
    Ok(ScoreBreakdown {
        perceptual_mean: tenths / 30.0,
        total_penalty,
        raw,
        clamped: raw.clamp(Score::MIN, Score::MAX),
    })
}

/// One entry of the shared DG test-vector file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgTestVector {
    pub sheet: DgScoresheet,
    pub weights: DgWeights,
    pub expected_raw: f64,
    pub expected_clamped: f64,
}

/// Test vectors shipped with the crate; consumed by UI tests as well.
pub const DG_TEST_VECTORS_JSON: &str = include_str!("../data/dg_test_vectors.json");

pub fn published_test_vectors() -> Vec<DgTestVector> {
    serde_json::from_str(DG_TEST_VECTORS_JSON).expect("bundled test vectors are valid JSON")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sheet(l: f64, vq: f64, r: f64) -> DgScoresheet {
        DgScoresheet::clean(l, vq, r)
    }

    #[test]
    fn perfect_sheet_scores_100() {
        let b = compute_dg_score(&sheet(100.0, 100.0, 100.0), &DgWeights::default()).unwrap();
        assert_eq!(b.raw, 100.0);
        assert_eq!(b.clamped, 100.0);
        assert_eq!(b.total_penalty, 0.0);
    }

    #[test]
    fn one_word_skip_costs_25() {
        let mut s = sheet(90.0, 90.0, 90.0);
        s.ws = 1;
        let b = compute_dg_score(&s, &DgWeights::default()).unwrap();
        assert_eq!(b.raw, 65.0);
        assert_eq!(b.clamped, 65.0);
    }

    #[test]
    fn caps_then_clamps() {
        let mut s = sheet(100.0, 100.0, 100.0);
        s.mp = 20;
        s.sp = 10;
        let b = compute_dg_score(&s, &DgWeights::default()).unwrap();
        assert_eq!(b.raw, -45.0);
        assert_eq!(b.clamped, 0.0);
    }

    #[test]
    fn bad_perceptual_names_field() {
        let err = compute_dg_score(&sheet(100.0, 101.0, 50.0), &DgWeights::default()).unwrap_err();
        assert_eq!(err.field, "voice_quality");
    }

    #[test]
    fn negative_count_rejected_on_parse() {
        let json = r#"{"mp":0,"sp":-1,"us":0,"da":0,"sef":0,"ws":0,
            "liveliness":50,"voice_quality":50,"rhythm":50}"#;
        let err = serde_json::from_str::<DgScoresheet>(json).unwrap_err().to_string();
        assert!(err.contains("sp"), "{err}");
    }

    #[test]
    fn negative_weight_rejected() {
        let w = DgWeights {
            ws_penalty: -1.0,
            ..DgWeights::default()
        };
        let err = compute_dg_score(&sheet(50.0, 50.0, 50.0), &w).unwrap_err();
        assert_eq!(err.field, "ws_penalty");
    }

    fn arb_sheet() -> impl Strategy<Value = DgScoresheet> {
        (
            prop::array::uniform6(0u32..30),
            prop::array::uniform3(0u32..=1000),
        )
            .prop_map(|(c, p)| DgScoresheet {
                mp: c[0],
                sp: c[1],
                us: c[2],
                da: c[3],
                sef: c[4],
                ws: c[5],
                liveliness: f64::from(p[0]) / 10.0,
                voice_quality: f64::from(p[1]) / 10.0,
                rhythm: f64::from(p[2]) / 10.0,
                revised: false,
            })
    }

    proptest! {
        #[test]
        fn clamped_in_range_and_consistent(s in arb_sheet()) {
            let b = compute_dg_score(&s, &DgWeights::default()).unwrap();
            prop_assert!((0.0..=100.0).contains(&b.clamped));
            prop_assert!((b.raw - (b.perceptual_mean - b.total_penalty)).abs() < 1e-9);
            prop_assert_eq!(b.clamped, b.raw.clamp(0.0, 100.0));
        }

        #[test]
        fn monotone_in_counts(s in arb_sheet(), which in 0usize..6) {
            let w = DgWeights::default();
            let attr = CountAttribute::ALL[which];
            let mut more = s;
            *more.count_mut(attr) += 1;
            let before = compute_dg_score(&s, &w).unwrap().raw;
            let after = compute_dg_score(&more, &w).unwrap().raw;
            prop_assert!(after <= before);
        }

        #[test]
        fn monotone_in_perceptual(s in arb_sheet(), which in 0usize..3) {
            let w = DgWeights::default();
            let mut better = s;
            match which {
                0 => better.liveliness = (better.liveliness + 0.1).min(100.0),
                1 => better.voice_quality = (better.voice_quality + 0.1).min(100.0),
                _ => better.rhythm = (better.rhythm + 0.1).min(100.0),
            }
            let before = compute_dg_score(&s, &w).unwrap().raw;
            let after = compute_dg_score(&better, &w).unwrap().raw;
            prop_assert!(after >= before);
        }

        #[test]
        fn caps_saturate(s in arb_sheet(), extra in 1u32..50) {
            let w = DgWeights::default();
            let mut a = s;
            a.mp = w.mp_cap;
            a.sp = w.sp_cap;
            let mut b = a;
            b.mp += extra;
            b.sp += extra;
            prop_assert_eq!(compute_dg_score(&a, &w).unwrap().raw, compute_dg_score(&b, &w).unwrap().raw);
        }
    }
}
