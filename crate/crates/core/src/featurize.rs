//! Session log → behavior panel.

use serde::{Deserialize, Serialize};

use crate::affect::{dominant_affect, head_motion_variance, RuleSet, DEFAULT_MIN_CONFIDENCE};
use crate::channels::Channel;
use crate::curiosity::{derive_curiosity, CuriosityLabel, RatingConfig};
use crate::error::{Error, Result};
use crate::panel::{assemble_panel, build_slice_grid, BehaviorPanel, FaceFrame, FeatureEntry, SessionLog};
use crate::turns::{slice_turn_metrics, TurnMetricConfig};

/// How affect rules become the five affect channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffectEncoding {
    /// One-hot of the slice's dominant affect.
    #[default]
    Dominant,
    /// 1 for every affect that fired on at least one qualifying frame.
    AnyFired,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizeConfig {
    pub slice_len: f64,
    pub min_confidence: f64,
    pub affect_encoding: AffectEncoding,
    pub rules: RuleSet,
    pub turns: TurnMetricConfig,
    pub rating: RatingConfig,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        Self {
            slice_len: 10.0,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            affect_encoding: AffectEncoding::Dominant,
            rules: RuleSet::default(),
            turns: TurnMetricConfig::default(),
            rating: RatingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    pub panel: BehaviorPanel,
    pub curiosity: Vec<CuriosityLabel>,
}

pub fn featurize_session(session: &SessionLog, config: &FeaturizeConfig) -> Result<Featurized> {
    if !(0.0..=1.0).contains(&config.min_confidence) {
        return Err(Error::arg("min_confidence", "must lie in [0, 1]"));
    }
    session.validate()?;
    let grid = build_slice_grid(session, config.slice_len)?;
    let mut features = Vec::new();

    for v in &session.verbal_labels {
        features.push(FeatureEntry::new(&v.member, v.slice, v.channel, f64::from(v.count)));
    }

    let empty = Vec::new();
    for member in &session.members {
        let frames = session.frames.get(member).unwrap_or(&empty);
        for slice in &grid {
            let in_slice: Vec<FaceFrame> = frames.iter().filter(|f| slice.contains(f.timestamp)).cloned().collect();
            let dominant = dominant_affect(&in_slice, &config.rules, config.min_confidence);
            for (name, count) in &dominant.counts {
                let Some(channel) = Channel::from_affect(name) else {
                    continue;
                };
                let on = match config.affect_encoding {
                    AffectEncoding::Dominant => dominant.label.as_deref() == Some(name.as_str()),
                    AffectEncoding::AnyFired => *count > 0,
                };
                features.push(FeatureEntry::new(member, slice.index, channel, f64::from(u8::from(on))));
            }
            let head = head_motion_variance(&in_slice, config.min_confidence);
            for (channel, value) in [
                (Channel::HeadNod, head.nod_var),
                (Channel::HeadTurn, head.turn_var),
                (Channel::HeadIncline, head.incline_var),
            ] {
                if let Some(v) = value {
                    features.push(FeatureEntry::new(member, slice.index, channel, v));
                }
            }
        }
    }

    for m in slice_turn_metrics(&session.turns, &grid, &session.members, &config.turns)? {
        if let Some(v) = m.indegree {
            features.push(FeatureEntry::new(&m.member, m.slice, Channel::TurnIndegree, v));
        }
        if let Some(v) = m.outdegree {
            features.push(FeatureEntry::new(&m.member, m.slice, Channel::TurnOutdegree, v));
        }
    }

    let curiosity = derive_curiosity(&session.ratings, &config.rating)?;
    let labels: Vec<(String, usize, Option<f64>)> = curiosity
        .iter()
        .map(|l| (l.member.clone(), l.slice, l.score.map(f64::from)))
        .collect();

    let panel = assemble_panel(session, &grid, &features, &labels)?;
    Ok(Featurized { panel, curiosity })
}
