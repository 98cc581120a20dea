use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{opt_num, Tabular};
use crate::store::RatingRecord;

/// Normal-approximation critical value for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

/// Mean, sample standard deviation and 95% CI half-width of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub system_id: String,
    pub mean: f64,
    /// `None` for single-rating groups.
    pub sd: Option<f64>,
    pub ci95: Option<f64>,
    pub n: usize,
}

pub fn ci95_half_width(sd: f64, n: usize) -> f64 {
    Z_95 * sd / (n as f64).sqrt()
}

/// Summary of a non-empty sample (n−1 denominator).
pub fn summarize_values(group: &str, values: &[f64]) -> Option<SummaryStat> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Some(SummaryStat {
        system_id: group.to_string(),
        mean,
        sd,
        ci95: sd.map(|s| ci95_half_width(s, n)),
        n,
    })
}

/// Groups records by `key` and summarises [`RatingRecord::value`].
/// Returns the stats (ordered by key) and any warnings.
pub fn summarize_by<'a, I, K>(records: I, key: K) -> (Vec<SummaryStat>, Vec<String>)
where
    I: IntoIterator<Item = &'a RatingRecord>,
    K: Fn(&RatingRecord) -> String,
{
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        let v = r.value();
        let entry = groups.entry(key(r)).or_default();
        if v.is_finite() {
            entry.push(v);
        }
    }
    let mut warnings = Vec::new();
    let stats = groups
        .into_iter()
        .filter_map(|(k, values)| {
            let stat = summarize_values(&k, &values);
            match &stat {
                None => warnings.push(format!("group {k} has no ratings; omitted")),
                Some(s) if s.sd.is_none() => {
                    warnings.push(format!("group {k} has a single rating; sd undefined"))
                }
                _ => {}
            }
            stat
        })
        .collect();
    (stats, warnings)
}

/// Per-system summary, ordered by system id.
pub fn summarize<'a, I>(records: I) -> (Vec<SummaryStat>, Vec<String>)
where
    I: IntoIterator<Item = &'a RatingRecord>,
{
    summarize_by(records, |r| r.system_id.clone())
}

impl Tabular for [SummaryStat] {
    fn header(&self) -> Vec<&'static str> {
        vec!["system_id", "mean", "sd", "ci95", "n"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|s| {
                vec![
                    s.system_id.clone(),
                    s.mean.to_string(),
                    opt_num(s.sd),
                    opt_num(s.ci95),
                    s.n.to_string(),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_fixture() {
        let s = summarize_values("x", &[60.0, 70.0, 80.0]).unwrap();
        assert_eq!(s.mean, 70.0);
        assert_eq!(s.sd, Some(10.0));
        assert_abs_diff_eq!(s.ci95.unwrap(), 1.96 * 10.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.ci95.unwrap(), 11.32, epsilon = 0.005);
    }

    #[test]
    fn degenerate_and_single() {
        let s = summarize_values("x", &[55.5; 10]).unwrap();
        assert_eq!((s.sd, s.ci95), (Some(0.0), Some(0.0)));
        let one = summarize_values("x", &[42.0]).unwrap();
        assert_eq!((one.sd, one.ci95, one.n), (None, None, 1));
        assert!(summarize_values("x", &[]).is_none());
    }

    #[test]
    fn table_three_ci() {
        assert_abs_diff_eq!(ci95_half_width(22.89, 11_300), 0.42, epsilon = 0.005);
        assert_abs_diff_eq!(ci95_half_width(15.49, 11_300), 0.29, epsilon = 0.005);
    }

    proptest! {
        #[test]
        fn shift_and_scale(values in prop::collection::vec(0.0f64..100.0, 2..50), c in -50.0f64..50.0, k in 0.1f64..10.0) {
            let base = summarize_values("x", &values).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            let s = summarize_values("x", &shifted).unwrap();
            let t = summarize_values("x", &scaled).unwrap();
            prop_assert!((s.mean - (base.mean + c)).abs() < 1e-9);
            prop_assert!((s.sd.unwrap() - base.sd.unwrap()).abs() < 1e-9);
            prop_assert!((s.ci95.unwrap() - base.ci95.unwrap()).abs() < 1e-9);
            prop_assert!((t.sd.unwrap() - k * base.sd.unwrap()).abs() < 1e-8 * k.max(1.0) * 100.0);
            prop_assert!((t.ci95.unwrap() - k * base.ci95.unwrap()).abs() < 1e-8 * k.max(1.0) * 100.0);
        }
    }
}
