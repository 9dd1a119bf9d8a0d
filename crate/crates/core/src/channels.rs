//! Canonical behavior channels.
//!
//! The order of [`CHANNELS`] is fixed: it is the column order of every
//! behavior vector and the key order of every `panel.jsonl` record.
//!
//! | index | channels                                        |
//! |-------|-------------------------------------------------|
//! | 0–13  | verbal behavior counts                          |
//! | 14–18 | affect indicators (joy … flow)                  |
//! | 19–21 | head-motion variances (pitch, yaw, roll)        |
//! | 22–23 | turn-taking indegree / outdegree                |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    VerbalCount,
    Affect,
    HeadVariance,
    TurnMetric,
}

impl ChannelKind {
    /// Count-like channels default to 0 when no event was recorded; the
    /// others are unobserved and stay missing.
    pub fn absent_default(self) -> Option<f64> {
        match self {
            ChannelKind::VerbalCount | ChannelKind::Affect => Some(0.0),
            ChannelKind::HeadVariance | ChannelKind::TurnMetric => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Uncertainty,
    Argument,
    Justification,
    Suggestion,
    Agreement,
    QuestionOnTask,
    QuestionSocial,
    IdeaVerbalization,
    SharingFindings,
    HypothesisGeneration,
    TaskSentimentPos,
    TaskSentimentNeg,
    EvaluationPos,
    EvaluationNeg,
    Joy,
    Delight,
    Surprise,
    Confusion,
    Flow,
    HeadNod,
    HeadTurn,
    HeadIncline,
    TurnIndegree,
    TurnOutdegree,
}

pub const N_CHANNELS: usize = 24;

pub const CHANNELS: [Channel; N_CHANNELS] = [
    Channel::Uncertainty,
    Channel::Argument,
    Channel::Justification,
    Channel::Suggestion,
    Channel::Agreement,
    Channel::QuestionOnTask,
    Channel::QuestionSocial,
    Channel::IdeaVerbalization,
    Channel::SharingFindings,
    Channel::HypothesisGeneration,
    Channel::TaskSentimentPos,
    Channel::TaskSentimentNeg,
    Channel::EvaluationPos,
    Channel::EvaluationNeg,
    Channel::Joy,
    Channel::Delight,
    Channel::Surprise,
    Channel::Confusion,
    Channel::Flow,
    Channel::HeadNod,
    Channel::HeadTurn,
    Channel::HeadIncline,
    Channel::TurnIndegree,
    Channel::TurnOutdegree,
];

impl Channel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Uncertainty => "uncertainty",
            Channel::Argument => "argument",
            Channel::Justification => "justification",
            Channel::Suggestion => "suggestion",
            Channel::Agreement => "agreement",
            Channel::QuestionOnTask => "question_on_task",
            Channel::QuestionSocial => "question_social",
            Channel::IdeaVerbalization => "idea_verbalization",
            Channel::SharingFindings => "sharing_findings",
            Channel::HypothesisGeneration => "hypothesis_generation",
            Channel::TaskSentimentPos => "task_sentiment_pos",
            Channel::TaskSentimentNeg => "task_sentiment_neg",
            Channel::EvaluationPos => "evaluation_pos",
            Channel::EvaluationNeg => "evaluation_neg",
            Channel::Joy => "joy",
            Channel::Delight => "delight",
            Channel::Surprise => "surprise",
            Channel::Confusion => "confusion",
            Channel::Flow => "flow",
            Channel::HeadNod => "head_nod",
            Channel::HeadTurn => "head_turn",
            Channel::HeadIncline => "head_incline",
            Channel::TurnIndegree => "turn_indegree",
            Channel::TurnOutdegree => "turn_outdegree",
        }
    }

    pub fn kind(self) -> ChannelKind {
        match self.index() {
            0..=13 => ChannelKind::VerbalCount,
            14..=18 => ChannelKind::Affect,
            19..=21 => ChannelKind::HeadVariance,
            _ => ChannelKind::TurnMetric,
        }
    }

    pub fn is_verbal(self) -> bool {
        self.kind() == ChannelKind::VerbalCount
    }

    /// Affect channel matching an affect rule name, if any.
    pub fn from_affect(name: &str) -> Option<Channel> {
        CHANNELS[14..19].iter().copied().find(|c| c.name() == name)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CHANNELS
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_index_order() {
        for (i, c) in CHANNELS.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(c.name().parse::<Channel>().unwrap(), *c);
        }
    }

    #[test]
    fn kinds_partition_channels() {
        let count = |k| CHANNELS.iter().filter(|c| c.kind() == k).count();
        assert_eq!(count(ChannelKind::VerbalCount), 14);
        assert_eq!(count(ChannelKind::Affect), 5);
        assert_eq!(count(ChannelKind::HeadVariance), 3);
        assert_eq!(count(ChannelKind::TurnMetric), 2);
    }

    #[test]
    fn unknown_name_rejected() {
        assert!("laughter".parse::<Channel>().is_err());
        assert_eq!(Channel::from_affect("flow"), Some(Channel::Flow));
        assert_eq!(Channel::from_affect("argument"), None);
    }

    #[test]
    fn serde_name_matches_display() {
        for c in CHANNELS {
            let s = serde_json::to_string(&c).unwrap();
            assert_eq!(s, format!("\"{}\"", c.name()));
        }
    }
}
