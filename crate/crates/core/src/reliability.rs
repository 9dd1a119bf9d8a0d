//! Inter-rater reliability and consensus labels.
//!
//! Curiosity ground truth is derived from several naive raters in three
//! steps: drop raters who rated implausibly fast
//! ([`filter_raters_by_time`]), keep the rater subset with the best
//! single-measure ICC ([`best_rater_subset`]), and merge the remaining votes
//! while correcting for each rater's label over- and under-use
//! ([`inverse_bias_correct`]).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::RaterScore;

/// Units × raters table of ordinal scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    raters: Vec<String>,
    /// Row-major, `rows[unit][rater]`.
    rows: Vec<Vec<Option<u8>>>,
    levels: u8,
}

impl RatingMatrix {
    /// `levels` is the number of ordinal categories; scores lie in `0..levels`.
    pub fn new(raters: Vec<String>, rows: Vec<Vec<Option<u8>>>, levels: u8) -> Result<Self> {
        let unique: BTreeSet<&String> = raters.iter().collect();
        if unique.len() != raters.len() {
            return Err(Error::arg("raters", "duplicate rater id"));
        }
        for row in &rows {
            if row.len() != raters.len() {
                return Err(Error::arg(
                    "rows",
                    format!("row of width {} for {} raters", row.len(), raters.len()),
                ));
            }
            if let Some(bad) = row.iter().flatten().find(|&&s| s >= levels) {
                return Err(Error::arg("rows", format!("score {bad} outside 0..{levels}")));
            }
        }
        Ok(Self { raters, rows, levels })
    }

    /// Matrix over the three curiosity levels {0, 1, 2}.
    pub fn curiosity(raters: Vec<String>, rows: Vec<Vec<Option<u8>>>) -> Result<Self> {
        Self::new(raters, rows, 3)
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn rows(&self) -> &[Vec<Option<u8>>] {
        &self.rows
    }

    pub fn levels(&self) -> u8 {
        self.levels
    }

    pub fn n_units(&self) -> usize {
        self.rows.len()
    }

    /// Restriction to the given rater columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> RatingMatrix {
        RatingMatrix {
            raters: columns.iter().map(|&c| self.raters[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
            levels: self.levels,
        }
    }

    /// Rows with a score from every rater.
    pub fn complete_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .filter(|r| r.iter().all(Option::is_some))
            .map(|r| r.iter().map(|s| f64::from(s.unwrap())).collect())
            .collect()
    }
}

/// ICC(2,1): two-way random effects, absolute agreement, single measure.
///
/// Units with any missing score are dropped first.
pub fn icc(matrix: &RatingMatrix) -> Result<f64> {
    let k = matrix.raters.len();
    if k < 2 {
        return Err(Error::InsufficientData("ICC needs at least 2 raters".into()));
    }
    let data = matrix.complete_rows();
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "ICC needs at least 2 complete units, found {n}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = data.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = data.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / nf).collect();

    let first = data[0][0];
    if data.iter().flatten().all(|&x| x == first) {
        return Err(Error::Undefined("ICC of a constant matrix".into()));
    }
    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    // Residuals of the additive two-way fit, summed directly so that exact
    // agreement yields an exact zero error term.
    let ss_err: f64 = data
        .iter()
        .zip(&row_means)
        .flat_map(|(row, rm)| {
            row.iter()
                .zip(&col_means)
                .map(move |(x, cm)| (x - rm - cm + grand).powi(2))
        })
        .sum();

    let ms_rows = ss_rows / (nf - 1.0);
    let ms_cols = ss_cols / (kf - 1.0);
    let ms_err = ss_err / ((nf - 1.0) * (kf - 1.0));
    let denom = ms_rows + (kf - 1.0) * ms_err + kf * (ms_cols - ms_err) / nf;
    if !(denom.is_finite() && denom != 0.0) {
        return Err(Error::Undefined("ICC denominator is zero".into()));
    }
    Ok((ms_rows - ms_err) / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetChoice {
    pub raters: Vec<String>,
    /// Column indices of `raters` in the source matrix.
    pub columns: Vec<usize>,
    pub icc: f64,
    /// Number of subsets of size ≥ `min_size` that were enumerated.
    pub n_candidates: usize,
}

/// Largest number of raters for which exhaustive enumeration is allowed.
pub const MAX_SUBSET_RATERS: usize = 10;

const ICC_TIE_TOL: f64 = 1e-12;

/// Rater subset (of size ≥ `min_size`) with the highest ICC.
///
/// Ties go to the larger subset, then to the lexicographically smallest list
/// of rater ids. Subsets whose ICC is undefined are skipped.
pub fn best_rater_subset(matrix: &RatingMatrix, min_size: usize) -> Result<SubsetChoice> {
    let k = matrix.raters.len();
    if min_size < 2 {
        return Err(Error::arg("min_size", "must be at least 2"));
    }
    if k > MAX_SUBSET_RATERS {
        return Err(Error::arg(
            "raters",
            format!("{k} raters exceeds the enumeration limit of {MAX_SUBSET_RATERS}"),
        ));
    }
    if k < min_size {
        return Err(Error::InsufficientData(format!(
            "{k} raters, no subset of size {min_size}"
        )));
    }

    let mut n_candidates = 0;
    let mut best: Option<(f64, Vec<usize>, Vec<String>)> = None;
    for mask in 1u32..(1 << k) {
        if (mask.count_ones() as usize) < min_size {
            continue;
        }
        n_candidates += 1;
        let columns: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let sub = matrix.select(&columns);
        let Ok(value) = icc(&sub) else { continue };
        let mut ids = sub.raters;
        ids.sort();
        let better = match &best {
            None => true,
            Some((b_icc, b_cols, b_ids)) => {
                if value > b_icc + ICC_TIE_TOL {
                    true
                } else if value < b_icc - ICC_TIE_TOL {
                    false
                } else if columns.len() != b_cols.len() {
                    columns.len() > b_cols.len()
                } else {
                    ids < *b_ids
                }
            }
        };
        if better {
            best = Some((value, columns, ids));
        }
    }

    let (icc, columns, _) =
        best.ok_or_else(|| Error::Undefined(format!("no subset of size >= {min_size} has a defined ICC")))?;
    Ok(SubsetChoice {
        raters: columns.iter().map(|&c| matrix.raters[c].clone()).collect(),
        columns,
        icc,
        n_candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterProfile {
    pub rater: String,
    pub mean_hit_duration: f64,
    /// Share of this rater's ratings given to each score level.
    pub label_marginals: Vec<f64>,
}

impl RaterProfile {
    pub fn marginal(&self, score: u8) -> f64 {
        self.label_marginals.get(usize::from(score)).copied().unwrap_or(0.0)
    }
}

/// Per-rater duration and label usage over every rating they produced.
pub fn rater_profiles(ratings: &[RaterScore], levels: u8) -> Vec<RaterProfile> {
    let mut acc: BTreeMap<&str, (f64, Vec<usize>)> = BTreeMap::new();
    for r in ratings {
        let entry = acc
            .entry(r.rater.as_str())
            .or_insert_with(|| (0.0, vec![0; usize::from(levels)]));
        entry.0 += r.hit_duration;
        if let Some(c) = entry.1.get_mut(usize::from(r.score)) {
            *c += 1;
        }
    }
    acc.into_iter()
        .map(|(rater, (duration, counts))| {
            let n: usize = counts.iter().sum();
            RaterProfile {
                rater: rater.to_string(),
                mean_hit_duration: duration / n.max(1) as f64,
                label_marginals: counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect(),
            }
        })
        .collect()
}

/// Keeps raters whose mean time per HIT is at least `mean − k·sd` of all
/// raters' means (population sd).
pub fn filter_raters_by_time(profiles: &[RaterProfile], k: f64) -> Result<Vec<String>> {
    if profiles.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "time filtering needs at least 2 raters, got {}",
            profiles.len()
        )));
    }
    if k.is_nan() || k <= 0.0 {
        return Err(Error::arg("k", "must be positive"));
    }
    let n = profiles.len() as f64;
    let mean = profiles.iter().map(|p| p.mean_hit_duration).sum::<f64>() / n;
    let var = profiles
        .iter()
        .map(|p| (p.mean_hit_duration - mean).powi(2))
        .sum::<f64>()
        / n;
    let threshold = mean - k * var.sqrt();
    Ok(profiles
        .iter()
        .filter(|p| !(p.mean_hit_duration < threshold))
        .map(|p| p.rater.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    High,
    Low,
}

/// Rule that merges the votes of one unit into a single score.
pub trait ConsensusPolicy {
    fn decide(&self, votes: &BTreeMap<String, u8>, profiles: &[RaterProfile]) -> Result<u8>;
}

/// Each vote for score `s` weighs `1 / max(marginal_r(s), ε)`, so labels a
/// rater overuses count less and labels they rarely give count more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseMarginal {
    pub epsilon: f64,
    pub tie_break: TieBreak,
}

impl Default for InverseMarginal {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            tie_break: TieBreak::High,
        }
    }
}

const WEIGHT_TIE_REL: f64 = 1e-12;

impl ConsensusPolicy for InverseMarginal {
    fn decide(&self, votes: &BTreeMap<String, u8>, profiles: &[RaterProfile]) -> Result<u8> {
        if votes.is_empty() {
            return Err(Error::InsufficientData("empty vote set".into()));
        }
        let mut weights: BTreeMap<u8, f64> = BTreeMap::new();
        for (rater, &score) in votes {
            let profile = profiles
                .iter()
                .find(|p| &p.rater == rater)
                .ok_or_else(|| Error::arg("profiles", format!("no profile for rater `{rater}`")))?;
            *weights.entry(score).or_default() += 1.0 / profile.marginal(score).max(self.epsilon);
        }
        let max = weights.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied = weights
            .iter()
            .filter(|(_, &w)| w >= max * (1.0 - WEIGHT_TIE_REL))
            .map(|(&s, _)| s);
        let pick = match self.tie_break {
            TieBreak::High => tied.max(),
            TieBreak::Low => tied.min(),
        };
        Ok(pick.expect("non-empty weights"))
    }
}

pub fn inverse_bias_correct(votes: &BTreeMap<String, u8>, profiles: &[RaterProfile]) -> Result<u8> {
    InverseMarginal::default().decide(votes, profiles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaLevel {
    Nominal,
    Ordinal,
}

/// Krippendorff's alpha from the coincidence matrix of pairable values.
pub fn krippendorff_alpha(matrix: &RatingMatrix, level: AlphaLevel) -> Result<f64> {
    let v = usize::from(matrix.levels);
    let mut coincidence = vec![vec![0.0; v]; v];
    for row in &matrix.rows {
        let values: Vec<usize> = row.iter().flatten().map(|&s| usize::from(s)).collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (i, &a) in values.iter().enumerate() {
            for (j, &b) in values.iter().enumerate() {
                if i != j {
                    coincidence[a][b] += w;
                }
            }
        }
    }
    let marg: Vec<f64> = coincidence.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marg.iter().sum();
    if n < 2.0 {
        return Err(Error::InsufficientData("fewer than 2 pairable values".into()));
    }

    let delta2 = |c: usize, k: usize| -> f64 {
        match level {
            AlphaLevel::Nominal => f64::from(u8::from(c != k)),
            AlphaLevel::Ordinal => {
                let (lo, hi) = (c.min(k), c.max(k));
                let between: f64 = marg[lo..=hi].iter().sum();
                (between - (marg[c] + marg[k]) / 2.0).powi(2)
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..v {
        for k in 0..v {
            let d = delta2(c, k);
            observed += coincidence[c][k] * d;
            expected += marg[c] * marg[k] * d;
        }
    }
    if expected == 0.0 {
        return Err(Error::Undefined("alpha with a single observed value".into()));
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}
