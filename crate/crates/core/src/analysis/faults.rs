use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Tabular;
use crate::dg::{CountAttribute, PerceptualAttribute};
use crate::store::RatingRecord;

/// Per-system fault profile over DG scoresheets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFaults {
    pub system_id: String,
    pub n: usize,
    /// Fraction of sheets with a nonzero count, keyed by attribute name.
    pub error_rate: BTreeMap<CountAttribute, f64>,
    pub mean_count: BTreeMap<CountAttribute, f64>,
    pub perceptual_mean: BTreeMap<PerceptualAttribute, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultReport {
    pub systems: Vec<SystemFaults>,
    /// Records without a scoresheet.
    pub skipped: usize,
}

pub fn fault_rates<'a, I>(records: I) -> FaultReport
where
    I: IntoIterator<Item = &'a RatingRecord>,
{
    let mut groups: BTreeMap<&str, Vec<&crate::dg::DgScoresheet>> = BTreeMap::new();
    let mut skipped = 0;
    for r in records {
        match &r.dg {
            Some(dg) => groups.entry(r.system_id.as_str()).or_default().push(&dg.sheet),
            None => skipped += 1,
        }
    }
    let systems = groups
        .into_iter()
        .map(|(system, sheets)| {
            let n = sheets.len() as f64;
            let error_rate = CountAttribute::ALL
                .iter()
                .map(|&a| (a, sheets.iter().filter(|s| s.count(a) > 0).count() as f64 / n))
                .collect();
            let mean_count = CountAttribute::ALL
                .iter()
                .map(|&a| (a, sheets.iter().map(|s| f64::from(s.count(a))).sum::<f64>() / n))
                .collect();
            let perceptual_mean = PerceptualAttribute::ALL
                .iter()
                .map(|&a| (a, sheets.iter().map(|s| s.perceptual(a)).sum::<f64>() / n))
                .collect();
            SystemFaults {
                system_id: system.to_string(),
                n: sheets.len(),
                error_rate,
                mean_count,
                perceptual_mean,
            }
        })
        .collect();
    FaultReport { systems, skipped }
}

impl Tabular for FaultReport {
    fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["system_id", "n"];
        h.extend([
            "mp_rate", "sp_rate", "us_rate", "da_rate", "sef_rate", "ws_rate",
            "mp_mean", "sp_mean", "us_mean", "da_mean", "sef_mean", "ws_mean",
            "liveliness_mean", "voice_quality_mean", "rhythm_mean",
        ]);
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.systems
            .iter()
            .map(|s| {
                let mut row = vec![s.system_id.clone(), s.n.to_string()];
                row.extend(CountAttribute::ALL.iter().map(|a| s.error_rate[a].to_string()));
                row.extend(CountAttribute::ALL.iter().map(|a| s.mean_count[a].to_string()));
                row.extend(PerceptualAttribute::ALL.iter().map(|a| s.perceptual_mean[a].to_string()));
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevisionStats {
    pub revised: usize,
    pub total: usize,
    /// 0 when there are no sheets.
    pub rate: f64,
}

pub fn revision_rate<'a, I>(records: I) -> RevisionStats
where
    I: IntoIterator<Item = &'a RatingRecord>,
{
    let (mut revised, mut total) = (0, 0);
    for dg in records.into_iter().filter_map(|r| r.dg.as_ref()) {
        total += 1;
        revised += usize::from(dg.sheet.revised);
    }
    RevisionStats {
        revised,
        total,
        rate: if total == 0 { 0.0 } else { revised as f64 / total as f64 },
    }
}
