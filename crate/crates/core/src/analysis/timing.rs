use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::Tabular;
use crate::protocol::TestVariant;
use crate::store::{EventKind, EventRecord};

/// Wall-clock dwell on one page together with the audio it contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageTiming {
    pub session_id: String,
    pub variant: TestVariant,
    pub page_index: usize,
    pub opened_at: DateTime<Utc>,
    pub submitted_at: DateTime<Utc>,
    /// Sum of the durations of every clip on the page, in seconds.
    pub audio_duration_s: f64,
}

impl PageTiming {
    pub fn seconds(&self) -> f64 {
        (self.submitted_at - self.opened_at).num_milliseconds() as f64 / 1000.0
    }

    /// Dwell time divided by audio duration; `None` when either is not positive.
    pub fn normalized(&self) -> Option<f64> {
        let t = self.seconds();
        (t > 0.0 && self.audio_duration_s > 0.0).then(|| t / self.audio_duration_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageTimingStat {
    pub variant: TestVariant,
    pub page_index: usize,
    pub n: usize,
    pub mean_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTiming {
    pub variant: TestVariant,
    pub n: usize,
    pub mean_normalized: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub per_page: Vec<PageTimingStat>,
    pub per_variant: Vec<VariantTiming>,
    pub warnings: Vec<String>,
}

/// Pairs the first `page_open` with the last `page_submit` of every
/// (session, page). `page_info` supplies the variant and total audio
/// duration; pages it does not know are skipped with a warning.
pub fn timings_from_events<F>(events: &[EventRecord], page_info: F) -> (Vec<PageTiming>, Vec<String>)
where
    F: Fn(&str, usize) -> Option<(TestVariant, f64)>,
{
    type Span = (Option<DateTime<Utc>>, Option<DateTime<Utc>>);
    let mut spans: BTreeMap<(&str, usize), Span> = BTreeMap::new();
    for e in events {
        let span = spans.entry((e.session_id.as_str(), e.page_index)).or_default();
        match e.kind {
            EventKind::PageOpen => {
                span.0 = Some(span.0.map_or(e.timestamp, |t| t.min(e.timestamp)));
            }
            EventKind::PageSubmit => {
                span.1 = Some(span.1.map_or(e.timestamp, |t| t.max(e.timestamp)));
            }
            _ => {}
        }
    }
    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for ((session, page), span) in spans {
        let (Some(opened_at), Some(submitted_at)) = span else {
            continue;
        };
        match page_info(session, page) {
            Some((variant, audio_duration_s)) => out.push(PageTiming {
                session_id: session.to_string(),
                variant,
                page_index: page,
                opened_at,
                submitted_at,
                audio_duration_s,
            }),
            None => warnings.push(format!("{session} page {page}: no audio duration; skipped")),
        }
    }
    (out, warnings)
}

/// Mean normalized time per (variant, page index) and per variant.
pub fn timing(pages: &[PageTiming]) -> TimingReport {
    let mut warnings = Vec::new();
    let mut per_page: BTreeMap<(TestVariant, usize), Vec<f64>> = BTreeMap::new();
    let mut per_variant: BTreeMap<TestVariant, (Vec<f64>, f64)> = BTreeMap::new();
    for p in pages {
        match p.normalized() {
            Some(v) => {
                per_page.entry((p.variant, p.page_index)).or_default().push(v);
                let e = per_variant.entry(p.variant).or_default();
                e.0.push(v);
                e.1 += p.seconds();
            }
            None => warnings.push(format!(
                "{} page {}: non-positive interval ({} s over {} s audio); dropped",
                p.session_id,
                p.page_index,
                p.seconds(),
                p.audio_duration_s
            )),
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    TimingReport {
        per_page: per_page
            .into_iter()
            .map(|((variant, page_index), v)| PageTimingStat {
                variant,
                page_index,
                n: v.len(),
                mean_normalized: mean(&v),
            })
            .collect(),
        per_variant: per_variant
            .into_iter()
            .map(|(variant, (v, secs))| VariantTiming {
                variant,
                n: v.len(),
                mean_normalized: mean(&v),
                mean_seconds: secs / v.len() as f64,
            })
            .collect(),
        warnings,
    }
}

impl Tabular for TimingReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["variant", "page_index", "n", "mean_normalized"]
    }

    /// Per-page rows, then one aggregate row per variant with an empty page index.
    fn rows(&self) -> Vec<Vec<String>> {
        let pages = self.per_page.iter().map(|p| {
            vec![
                p.variant.to_string(),
                p.page_index.to_string(),
                p.n.to_string(),
                p.mean_normalized.to_string(),
            ]
        });
        let variants = self.per_variant.iter().map(|v| {
            vec![
                v.variant.to_string(),
                String::new(),
                v.n.to_string(),
                v.mean_normalized.to_string(),
            ]
        });
        pages.chain(variants).collect()
    }
}
