//! How many listeners and utterances are enough?
//!
//! For each (k listeners, m utterances) cell, every trial draws k raters
//! and m utterances without replacement, pools the selected ratings into
//! per-system means, and Spearman-correlates those with the full-population
//! means. The cell value is the average correlation over trials.
//!
//! Each trial has its own RNG stream keyed by `(seed, k, m, trial)` and the
//! average is reduced in trial order, so results are identical whether the
//! trials run sequentially or on the rayon pool.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::correlation::spearman;
use super::Tabular;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng;
use crate::store::RatingRecord;

/// Dense (rater × utterance × system) sums and counts of ratings.
#[derive(Debug, Clone)]
pub struct RatingCube {
    pub raters: Vec<String>,
    pub utterances: Vec<String>,
    pub systems: Vec<String>,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl RatingCube {
    /// Restricts to `systems` when given, otherwise every system present.
    pub fn from_records(records: &[RatingRecord], systems: Option<&[String]>) -> RatingCube {
        let keep = |s: &str| systems.is_none_or(|list| list.iter().any(|x| x == s));
        let mut raters = BTreeMap::new();
        let mut utts = BTreeMap::new();
        let mut syss = BTreeMap::new();
        for r in records.iter().filter(|r| r.value().is_finite() && keep(&r.system_id)) {
            raters.insert(r.rater_id.as_str(), 0);
            utts.insert(r.utterance_id.as_str(), 0);
            syss.insert(r.system_id.as_str(), 0);
        }
        for map in [&mut raters, &mut utts, &mut syss] {
            for (i, v) in map.values_mut().enumerate() {
                *v = i;
            }
        }
        let (nr, nu, ns) = (raters.len(), utts.len(), syss.len());
        let mut cube = RatingCube {
            raters: raters.keys().map(|s| s.to_string()).collect(),
            utterances: utts.keys().map(|s| s.to_string()).collect(),
            systems: syss.keys().map(|s| s.to_string()).collect(),
            sums: vec![0.0; nr * nu * ns],
            counts: vec![0; nr * nu * ns],
        };
        for r in records.iter().filter(|r| r.value().is_finite() && keep(&r.system_id)) {
            let idx = (raters[r.rater_id.as_str()] * nu + utts[r.utterance_id.as_str()]) * ns
                + syss[r.system_id.as_str()];
            cube.sums[idx] += r.value();
            cube.counts[idx] += 1;
        }
        cube
    }

    /// Pooled per-system means over the selected cells. Index lists must be
    /// ascending so that equal selections sum in equal order.
    pub fn means(&self, raters: &[usize], utterances: &[usize]) -> Vec<Option<f64>> {
        let (nu, ns) = (self.utterances.len(), self.systems.len());
        let mut sum = vec![0.0; ns];
        let mut count = vec![0u64; ns];
        for &r in raters {
            for &u in utterances {
                let base = (r * nu + u) * ns;
                for s in 0..ns {
                    sum[s] += self.sums[base + s];
                    count[s] += u64::from(self.counts[base + s]);
                }
            }
        }
        sum.into_iter()
            .zip(count)
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect()
    }

    pub fn full_means(&self) -> Vec<Option<f64>> {
        let r: Vec<usize> = (0..self.raters.len()).collect();
        let u: Vec<usize> = (0..self.utterances.len()).collect();
        self.means(&r, &u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub trials: usize,
    pub seed: u64,
    /// Systems to rank; `None` ranks every system present.
    pub systems: Option<Vec<String>>,
    #[serde(default)]
    pub exec: Execution,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            trials: 1000,
            seed: 0,
            systems: None,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub k: usize,
    pub m: usize,
    pub mean_rho: f64,
    pub trials: usize,
    pub valid_trials: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub listeners_total: usize,
    pub utterances_total: usize,
    pub systems: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<SensitivityCell>,
}

impl SensitivityGrid {
    pub fn cell(&self, k: usize, m: usize) -> Option<&SensitivityCell> {
        self.cells.iter().find(|c| c.k == k && c.m == m)
    }
}

/// `{5, 10, ..., total}` (always ending at `total`).
pub fn default_axis(total: usize) -> Vec<usize> {
    let mut axis: Vec<usize> = (1..).map(|i| i * 5).take_while(|&v| v < total).collect();
    if total > 0 {
        axis.push(total);
    }
    axis
}

fn sorted_sample(rng: &mut rand_chacha::ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut v = if k == n {
        (0..n).collect()
    } else {
        index::sample(rng, n, k).into_vec()
    };
    v.sort_unstable();
    v
}

fn trial_rho(cube: &RatingCube, full: &[Option<f64>], k: usize, m: usize, seed: u64, trial: usize) -> Option<f64> {
    let mut rng = rng::stream_rng(seed, &[k as u64, m as u64, trial as u64]);
    let raters = sorted_sample(&mut rng, cube.raters.len(), k);
    let utts = sorted_sample(&mut rng, cube.utterances.len(), m);
    let sub = cube.means(&raters, &utts);
    let (xs, ys): (Vec<f64>, Vec<f64>) = sub
        .iter()
        .zip(full)
        .filter_map(|(s, f)| Some(((*s)?, (*f)?)))
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    spearman(&xs, &ys).ok().map(|c| c.value)
}

fn cell_on_cube(cube: &RatingCube, k: usize, m: usize, trials: usize, seed: u64, exec: Execution) -> Result<SensitivityCell> {
    if k == 0 || k > cube.raters.len() {
        return Err(Error::Config(format!("k = {k} not in 1..={}", cube.raters.len())));
    }
    if m == 0 || m > cube.utterances.len() {
        return Err(Error::Config(format!("m = {m} not in 1..={}", cube.utterances.len())));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let full = cube.full_means();
    let rhos = par::map_range(trials, exec, |t| trial_rho(cube, &full, k, m, seed, t));
    let valid: Vec<f64> = rhos.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::NoValidTrials(trials));
    }
    Ok(SensitivityCell {
        k,
        m,
        mean_rho: valid.iter().sum::<f64>() / valid.len() as f64,
        trials,
        valid_trials: valid.len(),
        discarded: trials - valid.len(),
    })
}

/// One grid cell: `k` listeners, `m` utterances.
pub fn sensitivity(records: &[RatingRecord], k: usize, m: usize, config: &SensitivityConfig) -> Result<SensitivityCell> {
    let cube = RatingCube::from_records(records, config.systems.as_deref());
    cell_on_cube(&cube, k, m, config.trials, config.seed, config.exec)
}

/// Every (k, m) combination of the two axes.
pub fn sensitivity_grid(
    records: &[RatingRecord],
    ks: &[usize],
    ms: &[usize],
    config: &SensitivityConfig,
) -> Result<SensitivityGrid> {
    let cube = RatingCube::from_records(records, config.systems.as_deref());
    if cube.systems.len() < 2 {
        return Err(Error::Config("need at least two systems to rank".into()));
    }
    let pairs: Vec<(usize, usize)> = ks.iter().flat_map(|&k| ms.iter().map(move |&m| (k, m))).collect();
    let cells = par::map_slice(&pairs, config.exec, |&(k, m)| {
        cell_on_cube(&cube, k, m, config.trials, config.seed, config.exec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityGrid {
        listeners_total: cube.raters.len(),
        utterances_total: cube.utterances.len(),
        systems: cube.systems.clone(),
        trials: config.trials,
        seed: config.seed,
        cells,
    })
}

impl Tabular for SensitivityGrid {
    fn header(&self) -> Vec<&'static str> {
        vec!["k", "m", "mean_rho", "trials", "valid_trials", "discarded"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                vec![
                    c.k.to_string(),
                    c.m.to_string(),
                    c.mean_rho.to_string(),
                    c.trials.to_string(),
                    c.valid_trials.to_string(),
                    c.discarded.to_string(),
                ]
            })
            .collect()
    }
}
