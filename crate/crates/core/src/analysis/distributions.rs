use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Tabular;
use crate::protocol::REFERENCE_LABEL;
use crate::store::RatingRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKey {
    Rater,
    Utterance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    /// `sorted` must be non-empty and ascending.
    pub fn from_sorted(sorted: &[f64]) -> FiveNumber {
        FiveNumber {
            min: sorted[0],
            q1: quantile(sorted, 0.25),
            median: quantile(sorted, 0.5),
            q3: quantile(sorted, 0.75),
            max: sorted[sorted.len() - 1],
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile over ascending data (the common
/// "type 7" definition).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDistribution {
    pub system_id: String,
    pub n: usize,
    pub mean: f64,
    pub summary: FiveNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyDistribution {
    pub key: String,
    pub reference_mean: Option<f64>,
    pub systems: Vec<SystemDistribution>,
}

/// Per-rater or per-utterance box-plot data, ordered by ascending mean
/// hidden-reference score (keys without reference ratings last).
pub fn distributions(records: &[RatingRecord], by: DistributionKey) -> Vec<KeyDistribution> {
    let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let v = r.value();
        if !v.is_finite() {
            continue;
        }
        let key = match by {
            DistributionKey::Rater => r.rater_id.as_str(),
            DistributionKey::Utterance => r.utterance_id.as_str(),
        };
        grouped
            .entry(key)
            .or_default()
            .entry(r.system_id.as_str())
            .or_default()
            .push(v);
    }
    let mut out: Vec<KeyDistribution> = grouped
        .into_iter()
        .map(|(key, systems)| {
            let systems: Vec<SystemDistribution> = systems
                .into_iter()
                .map(|(system, mut values)| {
                    values.sort_by(f64::total_cmp);
                    SystemDistribution {
                        system_id: system.to_string(),
                        n: values.len(),
                        mean: values.iter().sum::<f64>() / values.len() as f64,
                        summary: FiveNumber::from_sorted(&values),
                    }
                })
                .collect();
            KeyDistribution {
                key: key.to_string(),
                reference_mean: systems
                    .iter()
                    .find(|s| s.system_id == REFERENCE_LABEL)
                    .map(|s| s.mean),
                systems,
            }
        })
        .collect();
    out.sort_by(|a, b| match (a.reference_mean, b.reference_mean) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.key.cmp(&b.key)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.key.cmp(&b.key),
    });
    out
}

impl Tabular for [KeyDistribution] {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "order", "key", "reference_mean", "system_id", "n", "mean", "min", "q1", "median", "q3",
            "max",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .enumerate()
            .flat_map(|(i, k)| {
                k.systems.iter().map(move |s| {
                    vec![
                        i.to_string(),
                        k.key.clone(),
                        super::opt_num(k.reference_mean),
                        s.system_id.clone(),
                        s.n.to_string(),
                        s.mean.to_string(),
                        s.summary.min.to_string(),
                        s.summary.q1.to_string(),
                        s.summary.median.to_string(),
                        s.summary.q3.to_string(),
                        s.summary.max.to_string(),
                    ]
                })
            })
            .collect()
    }
}
