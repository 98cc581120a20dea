//! Post-screening of raters on their hidden-reference scores.
//!
//! The standard rule rejects a rater whose hidden-reference score is
//! strictly below 90 on more than 15% of rated pages. Threshold sweeps use
//! the inclusive comparison (`score <= λ`) instead; both modes are
//! first-class and recorded in every report.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analysis::{summarize, SummaryStat};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::protocol::{TestVariant, REFERENCE_LABEL};
use crate::store::RatingRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    StrictlyBelow,
    AtOrBelow,
}

impl Comparison {
    fn violates(self, score: f64, threshold: f64) -> bool {
        match self {
            Comparison::StrictlyBelow => score < threshold,
            Comparison::AtOrBelow => score <= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    pub threshold: f64,
    pub fraction: f64,
    pub comparison: Comparison,
}

impl ScreeningConfig {
    /// Hidden reference below 90 on more than 15% of items.
    pub fn standard() -> Self {
        ScreeningConfig {
            threshold: 90.0,
            fraction: 0.15,
            comparison: Comparison::StrictlyBelow,
        }
    }

    /// Hidden reference at or below `lambda` on more than 15% of items.
    pub fn sweep(lambda: f64) -> Self {
        ScreeningConfig {
            threshold: lambda,
            fraction: 0.15,
            comparison: Comparison::AtOrBelow,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // thresholds outside [0,100] are allowed: they make the rule vacuous
        // (below 0) or saturating (at 100 and above)
        if !self.threshold.is_finite() {
            return Err(Error::Config(format!("threshold {} is not finite", self.threshold)));
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::Config(format!("fraction {} not in [0,1]", self.fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Retained,
    Rejected,
    /// No hidden-reference ratings, so the rule cannot be applied; the
    /// rater's data is excluded.
    NoHiddenReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterScreening {
    pub rater_id: String,
    pub items: usize,
    pub violations: usize,
    pub violation_fraction: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub config: ScreeningConfig,
    pub retained: BTreeSet<String>,
    /// Includes raters flagged for having no hidden-reference ratings.
    pub rejected: BTreeSet<String>,
    pub flagged: BTreeSet<String>,
    pub raters: Vec<RaterScreening>,
    pub means_before: Vec<SummaryStat>,
    pub means_after: Vec<SummaryStat>,
}

impl ScreeningReport {
    /// Ratings from retained raters only.
    pub fn retained_records<'a>(&self, ratings: &'a [RatingRecord]) -> Vec<&'a RatingRecord> {
        ratings
            .iter()
            .filter(|r| self.retained.contains(&r.rater_id))
            .collect()
    }
}

pub fn screen(ratings: &[RatingRecord], config: ScreeningConfig) -> Result<ScreeningReport> {
    config.validate()?;
    let mut per_rater: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in ratings {
        let entry = per_rater.entry(&r.rater_id).or_default();
        if r.system_id == REFERENCE_LABEL {
            if let Some(score) = r.score {
                entry.0 += 1;
                if config.comparison.violates(score.value(), config.threshold) {
                    entry.1 += 1;
                }
            }
        }
    }

    let mut report = ScreeningReport {
        config,
        retained: BTreeSet::new(),
        rejected: BTreeSet::new(),
        flagged: BTreeSet::new(),
        raters: Vec::with_capacity(per_rater.len()),
        means_before: Vec::new(),
        means_after: Vec::new(),
    };
    for (rater, (items, violations)) in per_rater {
        let fraction = (items > 0).then(|| violations as f64 / items as f64);
        let verdict = match fraction {
            None => {
                log::warn!("rater {rater} has no hidden-reference ratings; excluded from screening");
                report.flagged.insert(rater.to_string());
                Verdict::NoHiddenReference
            }
            Some(f) if f > config.fraction => Verdict::Rejected,
            Some(_) => Verdict::Retained,
        };
        if verdict == Verdict::Retained {
            report.retained.insert(rater.to_string());
        } else {
            report.rejected.insert(rater.to_string());
        }
        report.raters.push(RaterScreening {
            rater_id: rater.to_string(),
            items,
            violations,
            violation_fraction: fraction,
            verdict,
        });
    }

    let scored: Vec<&RatingRecord> = ratings.iter().filter(|r| r.score.is_some()).collect();
    report.means_before = summarize(scored.iter().copied()).0;
    report.means_after = summarize(
        scored
            .iter()
            .copied()
            .filter(|r| report.retained.contains(&r.rater_id)),
    )
    .0;
    Ok(report)
}

pub fn standard_screen(ratings: &[RatingRecord]) -> Result<ScreeningReport> {
    screen(ratings, ScreeningConfig::standard())
}

/// Screens once per threshold with the inclusive comparison.
pub fn lambda_sweep(
    ratings: &[RatingRecord],
    lambdas: &[f64],
    exec: Execution,
) -> Result<Vec<(f64, ScreeningReport)>> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda list is empty".into()));
    }
    par::map_slice(lambdas, exec, |&l| screen(ratings, ScreeningConfig::sweep(l)).map(|r| (l, r)))
        .into_iter()
        .collect()
}

/// Screens each (language, variant) campaign independently.
pub fn screen_by_campaign(
    ratings: &[RatingRecord],
    config: ScreeningConfig,
) -> Result<BTreeMap<(String, TestVariant), ScreeningReport>> {
    let mut groups: BTreeMap<(String, TestVariant), Vec<RatingRecord>> = BTreeMap::new();
    for r in ratings {
        groups
            .entry((r.language.clone(), r.variant))
            .or_default()
            .push(r.clone());
    }
    groups
        .into_iter()
        .map(|(k, v)| screen(&v, config).map(|rep| (k, rep)))
        .collect()
}

/// Long-format rows: one per threshold per system.
pub fn sweep_table(sweep: &[(f64, ScreeningReport)]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec![
        "lambda",
        "comparison",
        "retained",
        "rejected",
        "system_id",
        "mean_before",
        "mean_after",
        "n_after",
    ];
    let mut rows = Vec::new();
    for (lambda, rep) in sweep {
        let after: BTreeMap<&str, &SummaryStat> = rep
            .means_after
            .iter()
            .map(|s| (s.system_id.as_str(), s))
            .collect();
        for before in &rep.means_before {
            let a = after.get(before.system_id.as_str());
            rows.push(vec![
                lambda.to_string(),
                serde_json::to_value(rep.config.comparison)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                rep.retained.len().to_string(),
                rep.rejected.len().to_string(),
                before.system_id.clone(),
                before.mean.to_string(),
                a.map(|s| s.mean.to_string()).unwrap_or_default(),
                a.map(|s| s.n.to_string()).unwrap_or_else(|| "0".into()),
            ]);
        }
    }
    (header, rows)
}
