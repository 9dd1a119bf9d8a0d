//! Rule-based affect inference from facial action units, and head-motion
//! variance features.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::panel::FaceFrame;

/// Action-unit codes tracked per frame, in bit order.
pub const AU_CODES: [u8; 12] = [1, 2, 4, 5, 6, 7, 12, 15, 23, 25, 26, 45];

/// Shipped rule set; identical to [`RuleSet::default`].
pub const DEFAULT_RULES_TOML: &str = include_str!("../rules/default_rules.toml");

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.8;

fn au_bit(code: u8) -> Option<u16> {
    AU_CODES.iter().position(|&c| c == code).map(|i| 1 << i)
}

/// Set of active action units, one bit per entry of [`AU_CODES`].
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct AuSet(u16);

impl AuSet {
    pub const EMPTY: AuSet = AuSet(0);

    pub fn from_codes(codes: impl IntoIterator<Item = u8>) -> Result<Self> {
        let mut bits = 0;
        for code in codes {
            bits |= au_bit(code).ok_or_else(|| Error::arg("au", format!("unsupported AU code {code}")))?;
        }
        Ok(AuSet(bits))
    }

    /// Raw bitmask; bit `i` is AU `AU_CODES[i]`.
    pub fn from_bits(bits: u16) -> Self {
        AuSet(bits & ((1 << AU_CODES.len()) - 1))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn contains(self, code: u8) -> bool {
        au_bit(code).is_some_and(|b| self.0 & b != 0)
    }

    pub fn insert(&mut self, code: u8) -> Result<()> {
        *self = AuSet(self.0 | AuSet::from_codes([code])?.0);
        Ok(())
    }

    pub fn is_superset(self, other: AuSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_disjoint(self, other: AuSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn codes(self) -> impl Iterator<Item = u8> {
        AU_CODES
            .iter()
            .enumerate()
            .filter(move |(i, _)| self.0 & (1 << i) != 0)
            .map(|(_, &c)| c)
    }
}

impl fmt::Debug for AuSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.codes()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffectRule {
    pub name: String,
    pub required: AuSet,
    pub forbidden: AuSet,
}

impl AffectRule {
    pub fn new(name: impl Into<String>, required: &[u8], forbidden: &[u8]) -> Result<Self> {
        let name = name.into();
        let required = AuSet::from_codes(required.iter().copied())?;
        let forbidden = AuSet::from_codes(forbidden.iter().copied())?;
        if !required.is_disjoint(forbidden) {
            return Err(Error::arg(
                "rule",
                format!("rule `{name}` both requires and forbids an AU"),
            ));
        }
        Ok(Self {
            name,
            required,
            forbidden,
        })
    }

    pub fn fires(&self, active: AuSet) -> bool {
        active.is_superset(self.required) && active.is_disjoint(self.forbidden)
    }
}

/// Ordered affect rules. Order doubles as tie-break priority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<AffectRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    rule: Vec<RuleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    name: String,
    required: Vec<u8>,
    #[serde(default)]
    forbidden: Vec<u8>,
}

impl RuleSet {
    pub fn new(rules: Vec<AffectRule>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for r in &rules {
            if !names.insert(r.name.as_str()) {
                return Err(Error::arg("rules", format!("duplicate rule name `{}`", r.name)));
            }
        }
        Ok(Self { rules })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: RuleFile = toml::from_str(s).map_err(|e| Error::Parse {
            file: "rules".into(),
            reason: e.to_string(),
        })?;
        let rules = file
            .rule
            .into_iter()
            .map(|r| AffectRule::new(r.name, &r.required, &r.forbidden))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rules)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse {
                file: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn rules(&self) -> &[AffectRule] {
        &self.rules
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.name.as_str())
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        // AU 5b in the surprise rule maps to AU 5: frames carry booleans only.
        let rules = [
            ("joy", &[6, 12][..], &[][..]),
            ("delight", &[7, 12, 25, 26], &[45]),
            ("surprise", &[1, 2, 5, 26], &[]),
            ("confusion", &[4, 7], &[12]),
            ("flow", &[23, 5, 7], &[15, 45, 2]),
        ]
        .into_iter()
        .map(|(name, req, forb)| AffectRule::new(name, req, forb).expect("static rule"))
        .collect();
        Self { rules }
    }
}

/// Names of all rules that fire on `frame`, in rule order.
pub fn evaluate_rules<'r>(frame: &FaceFrame, rules: &'r RuleSet) -> Vec<&'r str> {
    rules
        .rules
        .iter()
        .filter(|r| r.fires(frame.au))
        .map(|r| r.name.as_str())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominantAffect {
    pub label: Option<String>,
    /// Qualifying frames on which each rule fired, in rule order.
    pub counts: Vec<(String, usize)>,
}

impl DominantAffect {
    pub fn count(&self, name: &str) -> usize {
        self.counts.iter().find(|(n, _)| n == name).map_or(0, |(_, c)| *c)
    }
}

/// Most frequently firing affect over the frames of one slice.
///
/// Frames below `min_confidence` are ignored. Ties go to the rule listed
/// first in `rules`.
pub fn dominant_affect(frames: &[FaceFrame], rules: &RuleSet, min_confidence: f64) -> DominantAffect {
    let mut counts = vec![0usize; rules.rules.len()];
    for frame in frames.iter().filter(|f| f.confidence >= min_confidence) {
        for (count, rule) in counts.iter_mut().zip(&rules.rules) {
            if rule.fires(frame.au) {
                *count += 1;
            }
        }
    }
    let mut best: Option<usize> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|b| c > counts[b]) {
            best = Some(i);
        }
    }
    DominantAffect {
        label: best.map(|i| rules.rules[i].name.clone()),
        counts: rules
            .rules
            .iter()
            .zip(counts)
            .map(|(r, c)| (r.name.clone(), c))
            .collect(),
    }
}

/// Per-slice variances of head pitch (nod), yaw (turn) and roll (incline).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadMotionFeatures {
    pub nod_var: Option<f64>,
    pub turn_var: Option<f64>,
    pub incline_var: Option<f64>,
}

fn population_variance(xs: &[f64]) -> f64 {
    // Shifting by the first sample keeps constant series exactly at zero.
    let shift = xs[0];
    let n = xs.len() as f64;
    let mean = xs.iter().map(|x| x - shift).sum::<f64>() / n;
    xs.iter().map(|x| (x - shift - mean).powi(2)).sum::<f64>() / n
}

pub fn head_motion_variance(frames: &[FaceFrame], min_confidence: f64) -> HeadMotionFeatures {
    let kept: Vec<&FaceFrame> = frames.iter().filter(|f| f.confidence >= min_confidence).collect();
    if kept.len() < 2 {
        return HeadMotionFeatures::default();
    }
    let var_of = |get: fn(&FaceFrame) -> f64| {
        let xs: Vec<f64> = kept.iter().map(|f| get(f)).collect();
        Some(population_variance(&xs))
    };
    HeadMotionFeatures {
        nod_var: var_of(|f| f.pitch),
        turn_var: var_of(|f| f.yaw),
        incline_var: var_of(|f| f.roll),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(aus: &[u8], confidence: f64) -> FaceFrame {
        FaceFrame {
            timestamp: 0.0,
            au: AuSet::from_codes(aus.iter().copied()).unwrap(),
            confidence,
            pitch: 0.0,
            yaw: 0.0,
            roll: 0.0,
        }
    }

    fn posed(pitch: f64, yaw: f64, roll: f64) -> FaceFrame {
        FaceFrame {
            pitch,
            yaw,
            roll,
            ..frame(&[], 1.0)
        }
    }

    #[test]
    fn joy_fires_on_six_and_twelve() {
        let rules = RuleSet::default();
        assert_eq!(evaluate_rules(&frame(&[6, 12], 1.0), &rules), vec!["joy"]);
    }

    #[test]
    fn nothing_fires_on_neutral_face() {
        let rules = RuleSet::default();
        assert!(evaluate_rules(&frame(&[], 1.0), &rules).is_empty());
    }

    #[test]
    fn joy_and_delight_co_fire() {
        let rules = RuleSet::default();
        let fired = evaluate_rules(&frame(&[6, 7, 12, 25, 26], 1.0), &rules);
        assert_eq!(fired, vec!["joy", "delight"]);
        // blink vetoes delight only
        let fired = evaluate_rules(&frame(&[6, 7, 12, 25, 26, 45], 1.0), &rules);
        assert_eq!(fired, vec!["joy"]);
    }

    #[test]
    fn shipped_file_matches_default() {
        assert_eq!(RuleSet::from_toml_str(DEFAULT_RULES_TOML).unwrap(), RuleSet::default());
    }

    #[test]
    fn rule_validation() {
        assert!(AffectRule::new("x", &[6], &[6]).is_err());
        assert!(AffectRule::new("x", &[3], &[]).is_err());
        let r = AffectRule::new("x", &[6], &[]).unwrap();
        assert!(RuleSet::new(vec![r.clone(), r]).is_err());
        assert!(RuleSet::from_toml_str("[[rule]]\nname = \"x\"\nrequired = [99]\n").is_err());
    }

    #[test]
    fn dominant_all_joy() {
        let frames = vec![frame(&[6, 12], 0.95); 10];
        let d = dominant_affect(&frames, &RuleSet::default(), DEFAULT_MIN_CONFIDENCE);
        assert_eq!(d.label.as_deref(), Some("joy"));
        assert_eq!(d.count("joy"), 10);
    }

    #[test]
    fn dominant_majority_wins() {
        let mut frames = vec![frame(&[4, 7], 0.9); 6];
        frames.extend(vec![frame(&[6, 12], 0.9); 4]);
        let d = dominant_affect(&frames, &RuleSet::default(), 0.8);
        assert_eq!(d.label.as_deref(), Some("confusion"));
        assert_eq!((d.count("confusion"), d.count("joy")), (6, 4));
    }

    #[test]
    fn dominant_gated_by_confidence() {
        let frames = vec![frame(&[6, 12], 0.5); 5];
        let d = dominant_affect(&frames, &RuleSet::default(), 0.8);
        assert_eq!(d.label, None);
        assert_eq!(d.count("joy"), 0);
    }

    #[test]
    fn dominant_tie_uses_rule_order() {
        let frames = vec![frame(&[4, 7], 0.9), frame(&[1, 2, 5, 26], 0.9)];
        let d = dominant_affect(&frames, &RuleSet::default(), 0.8);
        assert_eq!(d.label.as_deref(), Some("surprise"));
    }

    #[test]
    fn head_variance_cases() {
        let constant = vec![posed(0.1, 0.0, 0.0); 3];
        assert_eq!(head_motion_variance(&constant, 0.8).nod_var, Some(0.0));

        let ramp: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&p| posed(p, 0.0, 0.0)).collect();
        let v = head_motion_variance(&ramp, 0.8).nod_var.unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);

        let single = vec![posed(1.0, 1.0, 1.0)];
        assert_eq!(head_motion_variance(&single, 0.8), HeadMotionFeatures::default());
    }
}
