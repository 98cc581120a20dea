use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Tabular;
use crate::store::RatingRecord;

/// Share of CMOS answers favouring the system, equal, or favouring the
/// reference side. Each percentage is rounded to one decimal on its own,
/// so the three add to 100 within 0.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRow {
    pub system_id: String,
    pub n: usize,
    pub pct_system: f64,
    pub pct_equal: f64,
    pub pct_reference: f64,
    pub mean_cmos: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceReport {
    pub rows: Vec<PreferenceRow>,
    /// Records skipped because they carried no CMOS answer.
    pub skipped: usize,
}

fn rounded_shares(counts: [usize; 3]) -> [f64; 3] {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return [0.0; 3];
    }
    // nearest tenth of a percent, halves rounded up, in integers
    counts.map(|c| ((2000 * c + n) / (2 * n)) as f64 / 10.0)
}

/// Preference split per system. Positive CMOS favours the system.
pub fn cmos_preferences<'a, I>(records: I) -> PreferenceReport
where
    I: IntoIterator<Item = &'a RatingRecord>,
{
    let mut groups: BTreeMap<String, ([usize; 3], f64)> = BTreeMap::new();
    let mut skipped = 0;
    for r in records {
        let Some(c) = r.cmos else {
            skipped += 1;
            continue;
        };
        let entry = groups.entry(r.system_id.clone()).or_default();
        let v = c.value();
        let idx = if v > 0.0 {
            0
        } else if v == 0.0 {
            1
        } else {
            2
        };
        entry.0[idx] += 1;
        entry.1 += v;
    }
    let rows = groups
        .into_iter()
        .map(|(system_id, (counts, sum))| {
            let n: usize = counts.iter().sum();
            let [s, e, r] = rounded_shares(counts);
            PreferenceRow {
                system_id,
                n,
                pct_system: s,
                pct_equal: e,
                pct_reference: r,
                mean_cmos: sum / n as f64,
            }
        })
        .collect();
    PreferenceReport { rows, skipped }
}

impl Tabular for PreferenceReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["system_id", "n", "pct_system", "pct_equal", "pct_reference", "mean_cmos"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.system_id.clone(),
                    r.n.to_string(),
                    r.pct_system.to_string(),
                    r.pct_equal.to_string(),
                    r.pct_reference.to_string(),
                    r.mean_cmos.to_string(),
                ]
            })
            .collect()
    }
}
