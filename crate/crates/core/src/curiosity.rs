//! Multi-rater curiosity ratings to one consensus label per (member, slice).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::RaterScore;
use crate::reliability::{
    best_rater_subset, filter_raters_by_time, rater_profiles, ConsensusPolicy, InverseMarginal, RatingMatrix,
    MAX_SUBSET_RATERS,
};

pub const CURIOSITY_LEVELS: u8 = 3;

/// Which ratings form one rating task (HIT) for subset selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKey {
    /// All slices of one member's video.
    #[default]
    Member,
    /// Every rating in the session.
    Session,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingConfig {
    pub min_raters: usize,
    pub time_sd_k: f64,
    pub hit_key: HitKey,
    pub policy: InverseMarginal,
}

impl Default for RatingConfig {
    fn default() -> Self {
        Self {
            min_raters: 2,
            time_sd_k: 1.5,
            hit_key: HitKey::Member,
            policy: InverseMarginal::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuriosityLabel {
    pub member: String,
    pub slice: usize,
    pub score: Option<u8>,
    /// ICC of the rater subset used for this unit's HIT, when defined.
    pub subset_icc: Option<f64>,
}

pub fn derive_curiosity(ratings: &[RaterScore], config: &RatingConfig) -> Result<Vec<CuriosityLabel>> {
    if config.min_raters < 2 {
        return Err(Error::arg("min_raters", "must be at least 2"));
    }
    let mut seen = BTreeSet::new();
    for r in ratings {
        if !seen.insert((&r.member, r.slice, &r.rater)) {
            return Err(Error::DuplicateEntry {
                member: r.member.clone(),
                slice: r.slice,
                channel: format!("rating by `{}`", r.rater),
            });
        }
    }

    let profiles = rater_profiles(ratings, CURIOSITY_LEVELS);
    let retained: BTreeSet<String> = if profiles.len() >= 2 {
        filter_raters_by_time(&profiles, config.time_sd_k)?
            .into_iter()
            .collect()
    } else {
        profiles.iter().map(|p| p.rater.clone()).collect()
    };

    let mut hits: BTreeMap<&str, Vec<&RaterScore>> = BTreeMap::new();
    for r in ratings.iter().filter(|r| retained.contains(&r.rater)) {
        let key = match config.hit_key {
            HitKey::Member => r.member.as_str(),
            HitKey::Session => "",
        };
        hits.entry(key).or_default().push(r);
    }

    let mut labels = Vec::new();
    for hit in hits.values() {
        let units: BTreeSet<(&str, usize)> = hit.iter().map(|r| (r.member.as_str(), r.slice)).collect();
        let raters: Vec<String> = hit
            .iter()
            .map(|r| r.rater.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cells: BTreeMap<(&str, usize), BTreeMap<&str, u8>> = BTreeMap::new();
        for r in hit {
            cells
                .entry((r.member.as_str(), r.slice))
                .or_default()
                .insert(r.rater.as_str(), r.score);
        }

        let (chosen, subset_icc) = if raters.len() >= config.min_raters && raters.len() <= MAX_SUBSET_RATERS {
            let rows = units
                .iter()
                .map(|u| raters.iter().map(|id| cells[u].get(id.as_str()).copied()).collect())
                .collect();
            let matrix = RatingMatrix::new(raters.clone(), rows, CURIOSITY_LEVELS)?;
            match best_rater_subset(&matrix, config.min_raters) {
                Ok(choice) => (choice.raters, Some(choice.icc)),
                Err(_) => (raters.clone(), None),
            }
        } else {
            (raters.clone(), None)
        };

        for unit in &units {
            let votes: BTreeMap<String, u8> = cells[unit]
                .iter()
                .filter(|(id, _)| chosen.iter().any(|c| c == *id))
                .map(|(id, &s)| (id.to_string(), s))
                .collect();
            let score = if votes.is_empty() {
                None
            } else {
                Some(config.policy.decide(&votes, &profiles)?)
            };
            labels.push(CuriosityLabel {
                member: unit.0.to_string(),
                slice: unit.1,
                score,
                subset_icc,
            });
        }
    }
    labels.sort_by(|a, b| (&a.member, a.slice).cmp(&(&b.member, b.slice)));
    Ok(labels)
}
