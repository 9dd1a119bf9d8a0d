//! Turn-taking graphs and weighted degree metrics.
//!
//! Speakers are nodes. Every change of speaker A → B adds to the directed
//! edge `B → A` ("B responded to A"): one count, the response latency, and
//! the floor time A held before handing over.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Slice, TurnEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SilenceMode {
    /// Floor time of the turns handed over to the member.
    #[default]
    FloorTime,
    /// Gap between the prior turn's end and the member's response.
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurnMetricConfig {
    pub alpha_in: f64,
    pub alpha_out: f64,
    /// Floor (seconds) applied to zero silence / talkativeness.
    pub epsilon: f64,
    pub silence: SilenceMode,
}

impl Default for TurnMetricConfig {
    fn default() -> Self {
        Self {
            alpha_in: -0.5,
            alpha_out: 0.5,
            epsilon: 0.1,
            silence: SilenceMode::FloorTime,
        }
    }
}

impl TurnMetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::arg("epsilon", "must be positive"));
        }
        if !(self.alpha_in.is_finite() && self.alpha_out.is_finite()) {
            return Err(Error::arg("alpha", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeWeight {
    pub count: u32,
    pub latency_sum: f64,
    pub floor_time_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TurnGraph {
    pub window: (f64, f64),
    pub nodes: BTreeSet<String>,
    /// Keyed by `(responder, prior_speaker)`.
    pub edges: BTreeMap<(String, String), EdgeWeight>,
    /// Total in-window speaking time per member.
    pub floor_time: BTreeMap<String, f64>,
}

impl TurnGraph {
    fn out_edges<'a>(&'a self, member: &'a str) -> impl Iterator<Item = (&'a str, &'a EdgeWeight)> + 'a {
        self.edges
            .iter()
            .filter(move |((from, _), _)| from == member)
            .map(|((_, to), w)| (to.as_str(), w))
    }

    fn in_edges<'a>(&'a self, member: &'a str) -> impl Iterator<Item = (&'a str, &'a EdgeWeight)> + 'a {
        self.edges
            .iter()
            .filter(move |((_, to), _)| to == member)
            .map(|((from, _), w)| (from.as_str(), w))
    }
}

struct Held<'a> {
    speaker: &'a str,
    end: f64,
    floor: f64,
}

pub fn build_turn_graph(turns: &[TurnEvent], window: (f64, f64)) -> TurnGraph {
    let (lo, hi) = window;
    let mut clipped: Vec<(&str, f64, f64)> = turns
        .iter()
        .map(|t| (t.speaker.as_str(), t.start.max(lo), t.end.min(hi)))
        .filter(|(_, s, e)| e > s)
        .collect();
    clipped.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(b.0)));

    let mut graph = TurnGraph {
        window,
        ..Default::default()
    };
    // Consecutive turns by one speaker merge into a single floor holding.
    let mut held: Vec<Held> = Vec::new();
    for (speaker, start, end) in clipped {
        graph.nodes.insert(speaker.to_string());
        *graph.floor_time.entry(speaker.to_string()).or_default() += end - start;
        match held.last_mut() {
            Some(h) if h.speaker == speaker => {
                h.end = h.end.max(end);
                h.floor += end - start;
            }
            prev => {
                if let Some(prev) = prev {
                    let w = graph
                        .edges
                        .entry((speaker.to_string(), prev.speaker.to_string()))
                        .or_default();
                    w.count += 1;
                    w.latency_sum += (start - prev.end).max(0.0);
                    w.floor_time_sum += prev.floor;
                }
                held.push(Held {
                    speaker,
                    end,
                    floor: end - start,
                });
            }
        }
    }
    graph
}

/// `activity^(1-α) · max(silence, ε)^α`; missing when the member responded
/// to nobody in the window.
pub fn turn_indegree(member: &str, graph: &TurnGraph, config: &TurnMetricConfig) -> Option<f64> {
    let activity = graph.out_edges(member).count();
    if activity == 0 {
        return None;
    }
    let silence: f64 = graph
        .out_edges(member)
        .map(|(_, w)| match config.silence {
            SilenceMode::FloorTime => w.floor_time_sum,
            SilenceMode::Gap => w.latency_sum,
        })
        .sum();
    let a = config.alpha_in;
    Some((activity as f64).powf(1.0 - a) * silence.max(config.epsilon).powf(a))
}

/// `participation_equality^(1-α) · max(talkativeness, ε)^α`; missing when
/// the member yielded the floor to nobody in the window.
pub fn turn_outdegree(member: &str, graph: &TurnGraph, config: &TurnMetricConfig) -> Option<f64> {
    let equality = graph.in_edges(member).count();
    if equality == 0 {
        return None;
    }
    let talkativeness: f64 = graph.in_edges(member).map(|(_, w)| w.floor_time_sum).sum();
    let a = config.alpha_out;
    Some((equality as f64).powf(1.0 - a) * talkativeness.max(config.epsilon).powf(a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnMetrics {
    pub member: String,
    pub slice: usize,
    pub indegree: Option<f64>,
    pub outdegree: Option<f64>,
}

/// Both metrics for every member in every slice window.
pub fn slice_turn_metrics(
    turns: &[TurnEvent],
    grid: &[Slice],
    members: &[String],
    config: &TurnMetricConfig,
) -> Result<Vec<TurnMetrics>> {
    config.validate()?;
    let mut out = Vec::with_capacity(grid.len() * members.len());
    for slice in grid {
        let graph = build_turn_graph(turns, (slice.start, slice.end));
        for m in members {
            out.push(TurnMetrics {
                member: m.clone(),
                slice: slice.index,
                indegree: turn_indegree(m, &graph, config),
                outdegree: turn_outdegree(m, &graph, config),
            });
        }
    }
    Ok(out)
}
