use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Tabular;

/// Label used for raters who did not disclose a value.
pub const UNDISCLOSED: &str = "undisclosed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterProfile {
    pub rater_id: String,
    pub language: String,
    #[serde(default)]
    pub gender: Option<String>,
    #[serde(default)]
    pub age: Option<u32>,
}

/// Age bands; a boundary age belongs to the upper band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "18-25")]
    From18To25,
    #[serde(rename = "25-30")]
    From25To30,
    #[serde(rename = "30-35")]
    From30To35,
    #[serde(rename = "35-40")]
    From35To40,
    #[serde(rename = "40+")]
    Over40,
}

impl AgeBand {
    pub const ALL: [AgeBand; 5] = [
        AgeBand::From18To25,
        AgeBand::From25To30,
        AgeBand::From30To35,
        AgeBand::From35To40,
        AgeBand::Over40,
    ];

    /// `None` below 18.
    pub fn of(age: u32) -> Option<AgeBand> {
        Some(match age {
            0..=17 => return None,
            18..=24 => AgeBand::From18To25,
            25..=29 => AgeBand::From25To30,
            30..=34 => AgeBand::From30To35,
            35..=39 => AgeBand::From35To40,
            _ => AgeBand::Over40,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBand::From18To25 => "18-25",
            AgeBand::From25To30 => "25-30",
            AgeBand::From30To35 => "30-35",
            AgeBand::From35To40 => "35-40",
            AgeBand::Over40 => "40+",
        }
    }
}

/// Counts for one (language, gender) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicsRow {
    pub language: String,
    pub gender: String,
    pub bands: BTreeMap<AgeBand, usize>,
    pub age_undisclosed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemographicsTable {
    pub rows: Vec<DemographicsRow>,
    /// Raters per language.
    pub language_totals: BTreeMap<String, usize>,
    /// Raters who disclosed neither gender nor age.
    pub fully_undisclosed: usize,
}

impl DemographicsTable {
    pub fn row(&self, language: &str, gender: &str) -> Option<&DemographicsRow> {
        self.rows.iter().find(|r| r.language == language && r.gender == gender)
    }
}

/// Counts raters per language by gender and age band. Missing values land
/// in [`UNDISCLOSED`]. A rater listed twice is counted once.
pub fn demographics_summary(raters: &[RaterProfile]) -> DemographicsTable {
    let mut seen = std::collections::BTreeSet::new();
    let mut table = DemographicsTable::default();
    let mut rows: BTreeMap<(String, String), DemographicsRow> = BTreeMap::new();
    for p in raters {
        if !seen.insert((p.language.as_str(), p.rater_id.as_str())) {
            continue;
        }
        let gender = p
            .gender
            .as_deref()
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(str::to_lowercase)
            .unwrap_or_else(|| UNDISCLOSED.to_string());
        let band = p.age.and_then(AgeBand::of);
        if gender == UNDISCLOSED && band.is_none() {
            table.fully_undisclosed += 1;
        }
        let row = rows
            .entry((p.language.clone(), gender.clone()))
            .or_insert_with(|| DemographicsRow {
                language: p.language.clone(),
                gender,
                bands: AgeBand::ALL.iter().map(|&b| (b, 0)).collect(),
                age_undisclosed: 0,
                total: 0,
            });
        match band {
            Some(b) => *row.bands.get_mut(&b).unwrap() += 1,
            None => row.age_undisclosed += 1,
        }
        row.total += 1;
        *table.language_totals.entry(p.language.clone()).or_default() += 1;
    }
    table.rows = rows.into_values().collect();
    table
}

impl Tabular for DemographicsTable {
    fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["language", "gender"];
        h.extend(AgeBand::ALL.iter().map(|b| b.label()));
        h.extend(["age_undisclosed", "total"]);
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![r.language.clone(), r.gender.clone()];
                row.extend(AgeBand::ALL.iter().map(|b| r.bands[b].to_string()));
                row.push(r.age_undisclosed.to_string());
                row.push(r.total.to_string());
                row
            })
            .collect()
    }
}
