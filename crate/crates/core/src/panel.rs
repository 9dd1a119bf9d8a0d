//! Session data model, slice grid and panel assembly.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::affect::AuSet;
use crate::channels::{Channel, CHANNELS, N_CHANNELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TurnEvent {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
}

impl TurnEvent {
    pub fn new(speaker: impl Into<String>, start: f64, end: f64) -> Self {
        Self {
            speaker: speaker.into(),
            start,
            end,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// One video frame of facial-expression and head-pose estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFrame {
    pub timestamp: f64,
    pub au: AuSet,
    /// Detector confidence; frames without a detected face carry 0.
    pub confidence: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerbalLabel {
    pub slice: usize,
    pub member: String,
    pub channel: Channel,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaterScore {
    pub slice: usize,
    pub member: String,
    pub rater: String,
    pub score: u8,
    pub hit_duration: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    pub group_id: String,
    pub members: Vec<String>,
    pub turns: Vec<TurnEvent>,
    pub frames: BTreeMap<String, Vec<FaceFrame>>,
    pub verbal_labels: Vec<VerbalLabel>,
    pub ratings: Vec<RaterScore>,
    pub session_length: f64,
}

impl SessionLog {
    /// Checks the structural invariants of a session log.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSession(format!("{}: {msg}", self.group_id)));
        if !(self.session_length.is_finite() && self.session_length > 0.0) {
            return bad(format!("session_length {} must be positive", self.session_length));
        }
        let mut seen = HashSet::new();
        for m in &self.members {
            if !seen.insert(m.as_str()) {
                return bad(format!("duplicate member id `{m}`"));
            }
        }
        let known = |m: &str| seen.contains(m);
        let in_span = |t: f64| t.is_finite() && (0.0..=self.session_length).contains(&t);

        let mut by_speaker: HashMap<&str, Vec<&TurnEvent>> = HashMap::new();
        for t in &self.turns {
            if !known(&t.speaker) {
                return Err(Error::UnknownMember(t.speaker.clone()));
            }
            if !(in_span(t.start) && in_span(t.end)) {
                return bad(format!(
                    "turn of `{}` [{}, {}] outside session",
                    t.speaker, t.start, t.end
                ));
            }
            if t.end <= t.start {
                return bad(format!(
                    "turn of `{}` has end {} <= start {}",
                    t.speaker, t.end, t.start
                ));
            }
            by_speaker.entry(&t.speaker).or_default().push(t);
        }
        for (speaker, mut turns) in by_speaker {
            turns.sort_by(|a, b| a.start.total_cmp(&b.start));
            if turns.windows(2).any(|w| w[1].start < w[0].end) {
                return bad(format!("overlapping turns for speaker `{speaker}`"));
            }
        }
        for (member, frames) in &self.frames {
            if !known(member) {
                return Err(Error::UnknownMember(member.clone()));
            }
            for f in frames {
                if !in_span(f.timestamp) {
                    return bad(format!("frame of `{member}` at {} outside session", f.timestamp));
                }
                if !(0.0..=1.0).contains(&f.confidence) {
                    return bad(format!("frame confidence {} not in [0, 1]", f.confidence));
                }
            }
        }
        for v in &self.verbal_labels {
            if !known(&v.member) {
                return Err(Error::UnknownMember(v.member.clone()));
            }
        }
        for r in &self.ratings {
            if !known(&r.member) {
                return Err(Error::UnknownMember(r.member.clone()));
            }
            if r.score > 2 {
                return bad(format!("rating score {} outside {{0,1,2}}", r.score));
            }
        }
        Ok(())
    }
}

/// Half-open time window `[start, end)` of one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slice {
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl Slice {
    /// Absolute time attached to the slice's observations.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Partitions `[0, session_length)` into consecutive slices of `slice_len`.
///
/// A trailing partial slice is kept only if it covers at least half of
/// `slice_len`.
pub fn slice_grid(session_length: f64, slice_len: f64) -> Result<Vec<Slice>> {
    if !(slice_len.is_finite() && slice_len > 0.0) {
        return Err(Error::arg("slice_len", format!("{slice_len} must be positive")));
    }
    if !(session_length.is_finite() && session_length > 0.0) {
        return Err(Error::InvalidSession("empty session".into()));
    }
    // Guard against 0.3 / 0.1 = 2.9999999999999996.
    let ratio = session_length / slice_len;
    let n_full = (ratio + 1e-9).floor() as usize;
    let mut grid: Vec<Slice> = (0..n_full)
        .map(|i| Slice {
            index: i,
            start: i as f64 * slice_len,
            end: ((i + 1) as f64 * slice_len).min(session_length),
        })
        .collect();
    let tail_start = n_full as f64 * slice_len;
    let tail = session_length - tail_start;
    if tail > 1e-9 * slice_len && tail >= 0.5 * slice_len {
        grid.push(Slice {
            index: n_full,
            start: tail_start,
            end: session_length,
        });
    }
    if grid.is_empty() {
        return Err(Error::InvalidSession(format!(
            "session of {session_length}s holds no slice of {slice_len}s"
        )));
    }
    Ok(grid)
}

pub fn build_slice_grid(session: &SessionLog, slice_len: f64) -> Result<Vec<Slice>> {
    slice_grid(session.session_length, slice_len)
}

/// One channel value for one member in one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEntry {
    pub member: String,
    pub slice: usize,
    pub channel: Channel,
    pub value: f64,
}

impl FeatureEntry {
    pub fn new(member: impl Into<String>, slice: usize, channel: Channel, value: f64) -> Self {
        Self {
            member: member.into(),
            slice,
            channel,
            value,
        }
    }
}

pub type ChannelVector = [Option<f64>; N_CHANNELS];

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecord {
    pub slice: usize,
    /// Slice midpoint in seconds.
    pub time: f64,
    pub channels: ChannelVector,
    pub curiosity: Option<f64>,
}

impl PanelRecord {
    pub fn get(&self, channel: Channel) -> Option<f64> {
        self.channels[channel.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberSeries {
    pub member: String,
    pub records: Vec<PanelRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPanel {
    pub group_id: String,
    pub members: Vec<MemberSeries>,
}

impl BehaviorPanel {
    pub fn n_records(&self) -> usize {
        self.members.iter().map(|m| m.records.len()).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = (&str, &PanelRecord)> {
        self.members
            .iter()
            .flat_map(|m| m.records.iter().map(move |r| (m.member.as_str(), r)))
    }
}

/// Builds one record per (member, slice) from sparse feature entries.
///
/// Channels without an entry fall back to [`ChannelKind::absent_default`]
/// (`0` for counts, missing otherwise). Input order does not matter.
///
/// [`ChannelKind::absent_default`]: crate::channels::ChannelKind::absent_default
pub fn assemble_panel(
    session: &SessionLog,
    grid: &[Slice],
    features: &[FeatureEntry],
    curiosity: &[(String, usize, Option<f64>)],
) -> Result<BehaviorPanel> {
    let member_pos: HashMap<&str, usize> = session
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    let locate = |member: &str, slice: usize| -> Result<usize> {
        let m = *member_pos
            .get(member)
            .ok_or_else(|| Error::UnknownMember(member.to_string()))?;
        if slice >= grid.len() {
            return Err(Error::SliceOutOfRange {
                index: slice,
                len: grid.len(),
            });
        }
        Ok(m * grid.len() + slice)
    };

    let n_cells = session.members.len() * grid.len();
    let mut values: Vec<ChannelVector> = vec![[None; N_CHANNELS]; n_cells];
    for entry in features {
        let cell = locate(&entry.member, entry.slice)?;
        let slot = &mut values[cell][entry.channel.index()];
        if slot.is_some() {
            return Err(Error::DuplicateEntry {
                member: entry.member.clone(),
                slice: entry.slice,
                channel: entry.channel.name().to_string(),
            });
        }
        *slot = Some(entry.value);
    }

    let mut labels: Vec<Option<Option<f64>>> = vec![None; n_cells];
    for (member, slice, score) in curiosity {
        let cell = locate(member, *slice)?;
        if labels[cell].is_some() {
            return Err(Error::DuplicateEntry {
                member: member.clone(),
                slice: *slice,
                channel: "curiosity".into(),
            });
        }
        labels[cell] = Some(*score);
    }

    let members = session
        .members
        .iter()
        .enumerate()
        .map(|(m, member)| {
            let records = grid
                .iter()
                .enumerate()
                .map(|(s, slice)| {
                    let cell = m * grid.len() + s;
                    let mut channels = values[cell];
                    for (c, v) in CHANNELS.iter().zip(channels.iter_mut()) {
                        if v.is_none() {
                            *v = c.kind().absent_default();
                        }
                    }
                    PanelRecord {
                        slice: slice.index,
                        time: slice.midpoint(),
                        channels,
                        curiosity: labels[cell].flatten(),
                    }
                })
                .collect();
            MemberSeries {
                member: member.clone(),
                records,
            }
        })
        .collect();

    Ok(BehaviorPanel {
        group_id: session.group_id.clone(),
        members,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Fraction of records with a missing value, in canonical channel order.
    pub channel_missing_rate: Vec<(Channel, f64)>,
    pub curiosity_missing_rate: f64,
    pub member_slice_counts: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_panel(panel: &BehaviorPanel) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for series in &panel.members {
        if !seen.insert(series.member.as_str()) {
            violations.push(format!("duplicate member series `{}`", series.member));
        }
        for w in series.records.windows(2) {
            if !(w[1].time > w[0].time) {
                violations.push(format!(
                    "non-monotone time for member `{}` at slice {} ({} after {})",
                    series.member, w[1].slice, w[1].time, w[0].time
                ));
            }
        }
        for r in &series.records {
            if !r.time.is_finite() {
                violations.push(format!("non-finite time for `{}` slice {}", series.member, r.slice));
            }
            for (c, v) in CHANNELS.iter().zip(&r.channels) {
                if let Some(v) = v {
                    if !v.is_finite() {
                        violations.push(format!("non-finite `{c}` for `{}` slice {}", series.member, r.slice));
                    } else if *v < 0.0 {
                        violations.push(format!(
                            "negative `{c}` ({v}) for `{}` slice {}",
                            series.member, r.slice
                        ));
                    }
                }
            }
            if let Some(y) = r.curiosity {
                if !y.is_finite() {
                    violations.push(format!(
                        "non-finite curiosity for `{}` slice {}",
                        series.member, r.slice
                    ));
                }
            }
        }
    }

    let n = panel.n_records();
    let rate = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let channel_missing_rate = CHANNELS
        .iter()
        .map(|&c| {
            let missing = panel.records().filter(|(_, r)| r.get(c).is_none()).count();
            (c, rate(missing))
        })
        .collect();
    let curiosity_missing_rate = rate(panel.records().filter(|(_, r)| r.curiosity.is_none()).count());
    let member_slice_counts = panel
        .members
        .iter()
        .map(|m| (m.member.clone(), m.records.len()))
        .collect();

    ValidationReport {
        violations,
        channel_missing_rate,
        curiosity_missing_rate,
        member_slice_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(members: &[&str], length: f64) -> SessionLog {
        SessionLog {
            group_id: "g1".into(),
            members: members.iter().map(|m| m.to_string()).collect(),
            session_length: length,
            ..Default::default()
        }
    }

    #[test]
    fn grid_exact_division() {
        let g = slice_grid(30.0, 10.0).unwrap();
        let bounds: Vec<_> = g.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(bounds, vec![(0.0, 10.0), (10.0, 20.0), (20.0, 30.0)]);
    }

    #[test]
    fn grid_thirty_minutes() {
        assert_eq!(slice_grid(1800.0, 10.0).unwrap().len(), 180);
    }

    #[test]
    fn grid_partial_tail() {
        let g = slice_grid(27.0, 10.0).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!((g[2].start, g[2].end), (20.0, 27.0));
        assert_eq!(g[2].midpoint(), 23.5);
        // 4s < 50% of 10s: dropped
        assert_eq!(slice_grid(24.0, 10.0).unwrap().len(), 2);
        // exactly half is kept
        assert_eq!(slice_grid(25.0, 10.0).unwrap().len(), 3);
    }

    #[test]
    fn grid_errors() {
        assert!(slice_grid(30.0, 0.0).is_err());
        assert!(slice_grid(30.0, -1.0).is_err());
        assert!(slice_grid(0.0, 10.0).is_err());
        assert!(slice_grid(3.0, 10.0).is_err());
    }

    #[test]
    fn assemble_empty_features_defaults() {
        let s = session(&["a"], 30.0);
        let grid = slice_grid(30.0, 10.0).unwrap();
        let p = assemble_panel(&s, &grid, &[], &[]).unwrap();
        assert_eq!(p.n_records(), 3);
        for (_, r) in p.records() {
            for c in CHANNELS {
                match c.kind() {
                    crate::ChannelKind::VerbalCount | crate::ChannelKind::Affect => {
                        assert_eq!(r.get(c), Some(0.0))
                    }
                    _ => assert_eq!(r.get(c), None),
                }
            }
            assert_eq!(r.curiosity, None);
        }
    }

    #[test]
    fn assemble_rejects_duplicates() {
        let s = session(&["a"], 30.0);
        let grid = slice_grid(30.0, 10.0).unwrap();
        let f = vec![
            FeatureEntry::new("a", 1, Channel::Argument, 1.0),
            FeatureEntry::new("a", 1, Channel::Argument, 2.0),
        ];
        assert!(matches!(
            assemble_panel(&s, &grid, &f, &[]),
            Err(Error::DuplicateEntry { slice: 1, .. })
        ));
    }

    #[test]
    fn assemble_rejects_unknown_member_and_slice() {
        let s = session(&["a"], 30.0);
        let grid = slice_grid(30.0, 10.0).unwrap();
        let f = vec![FeatureEntry::new("z", 0, Channel::Joy, 1.0)];
        assert!(matches!(
            assemble_panel(&s, &grid, &f, &[]),
            Err(Error::UnknownMember(_))
        ));
        let f = vec![FeatureEntry::new("a", 3, Channel::Joy, 1.0)];
        assert!(matches!(
            assemble_panel(&s, &grid, &f, &[]),
            Err(Error::SliceOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn assemble_full_channels_counts() {
        let s = session(&["a", "b"], 1800.0);
        let grid = slice_grid(1800.0, 10.0).unwrap();
        let mut f = Vec::new();
        for m in ["a", "b"] {
            for slice in 0..180 {
                for c in CHANNELS {
                    f.push(FeatureEntry::new(m, slice, c, slice as f64));
                }
            }
        }
        let p = assemble_panel(&s, &grid, &f, &[]).unwrap();
        assert_eq!(p.n_records(), 360);
        assert!(p.records().all(|(_, r)| r.channels.iter().all(|v| v.is_some())));
        assert!(validate_panel(&p).is_valid());
    }

    #[test]
    fn validate_flags_non_monotone_time() {
        let s = session(&["a"], 30.0);
        let grid = slice_grid(30.0, 10.0).unwrap();
        let mut p = assemble_panel(&s, &grid, &[], &[]).unwrap();
        assert!(validate_panel(&p).is_valid());
        p.members[0].records.swap(0, 2);
        let report = validate_panel(&p);
        assert!(report.violations.iter().any(|v| v.contains("non-monotone time")));
    }

    #[test]
    fn validate_reports_missing_rates() {
        let s = session(&["a"], 100.0);
        let grid = slice_grid(100.0, 10.0).unwrap();
        let labels: Vec<_> = (0..9).map(|i| ("a".to_string(), i, Some(1.0))).collect();
        let p = assemble_panel(&s, &grid, &[], &labels).unwrap();
        let report = validate_panel(&p);
        assert!((report.curiosity_missing_rate - 0.10).abs() < 1e-12);
        assert_eq!(report.member_slice_counts, vec![("a".to_string(), 10)]);
        let nod = report
            .channel_missing_rate
            .iter()
            .find(|(c, _)| *c == Channel::HeadNod)
            .unwrap();
        assert_eq!(nod.1, 1.0);
    }

    #[test]
    fn session_validation() {
        let mut s = session(&["a", "b"], 30.0);
        s.turns = vec![TurnEvent::new("a", 0.0, 5.0), TurnEvent::new("a", 4.0, 6.0)];
        assert!(s.validate().is_err());
        s.turns = vec![TurnEvent::new("a", 0.0, 5.0), TurnEvent::new("b", 4.0, 6.0)];
        assert!(s.validate().is_ok());
        s.turns.push(TurnEvent::new("a", 6.0, 40.0));
        assert!(s.validate().is_err());
        let dup = session(&["a", "a"], 30.0);
        assert!(dup.validate().is_err());
    }
}
