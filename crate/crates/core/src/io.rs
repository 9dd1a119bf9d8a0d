//! File formats: session directories in, `panel.jsonl` out.
//!
//! A session directory holds
//!
//! * `session.json`: `{"group_id": .., "members": [..], "session_length": ..}`
//! * `turns.csv`: `speaker,start,end`
//! * `frames.jsonl`: one face frame per line, `{"member", "timestamp",
//!   "au": {"6": true, ..}, "confidence", "pitch", "yaw", "roll"}`;
//!   `"face_detected": false` forces confidence 0
//! * `verbal.csv`: `slice,member,channel,count`
//! * `ratings.csv`: `slice,member,rater,score,hit_duration`
//!
//! `panel.jsonl` holds one record per (member, slice). Channel keys appear in
//! canonical order and missing values are `null`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::affect::AuSet;
use crate::channels::{Channel, CHANNELS, N_CHANNELS};
use crate::error::{Error, Result};
use crate::panel::{
    BehaviorPanel, ChannelVector, FaceFrame, MemberSeries, PanelRecord, RaterScore, SessionLog, TurnEvent, VerbalLabel,
};

pub const SESSION_FILES: [&str; 5] = ["session.json", "turns.csv", "frames.jsonl", "verbal.csv", "ratings.csv"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionMeta {
    group_id: String,
    members: Vec<String>,
    session_length: f64,
}

#[derive(Deserialize)]
struct TurnRow {
    speaker: String,
    start: f64,
    end: f64,
}

#[derive(Deserialize)]
struct FrameRow {
    member: String,
    timestamp: f64,
    #[serde(default)]
    au: BTreeMap<String, bool>,
    #[serde(default)]
    confidence: f64,
    #[serde(default = "yes")]
    face_detected: bool,
    #[serde(default)]
    pitch: f64,
    #[serde(default)]
    yaw: f64,
    #[serde(default)]
    roll: f64,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
struct VerbalRow {
    slice: usize,
    member: String,
    channel: String,
    count: u32,
}

#[derive(Deserialize)]
struct RatingRow {
    slice: usize,
    member: String,
    rater: String,
    score: u8,
    hit_duration: f64,
}

fn parse_err(path: &Path, reason: impl ToString) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| parse_err(path, e)))
        .collect()
}

/// Reads and validates one session directory.
pub fn read_session_dir(dir: &Path) -> Result<SessionLog> {
    let missing: Vec<PathBuf> = SESSION_FILES
        .iter()
        .map(|f| dir.join(f))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }

    let meta_path = dir.join("session.json");
    let meta: SessionMeta =
        serde_json::from_str(&std::fs::read_to_string(&meta_path)?).map_err(|e| parse_err(&meta_path, e))?;

    let turns = read_csv::<TurnRow>(&dir.join("turns.csv"))?
        .into_iter()
        .map(|r| TurnEvent::new(r.speaker, r.start, r.end))
        .collect();

    let frames_path = dir.join("frames.jsonl");
    let mut frames: BTreeMap<String, Vec<FaceFrame>> = BTreeMap::new();
    let file = std::io::BufReader::new(std::fs::File::open(&frames_path)?);
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: FrameRow =
            serde_json::from_str(&line).map_err(|e| parse_err(&frames_path, format!("line {}: {e}", lineno + 1)))?;
        let mut au = AuSet::EMPTY;
        for (code, active) in &row.au {
            let code: u8 = code
                .trim_start_matches("AU")
                .parse()
                .map_err(|_| parse_err(&frames_path, format!("line {}: bad AU key `{code}`", lineno + 1)))?;
            if *active {
                au.insert(code)
                    .map_err(|e| parse_err(&frames_path, format!("line {}: {e}", lineno + 1)))?;
            }
        }
        frames.entry(row.member).or_default().push(FaceFrame {
            timestamp: row.timestamp,
            au,
            confidence: if row.face_detected { row.confidence } else { 0.0 },
            pitch: row.pitch,
            yaw: row.yaw,
            roll: row.roll,
        });
    }

    let verbal_path = dir.join("verbal.csv");
    let verbal_labels = read_csv::<VerbalRow>(&verbal_path)?
        .into_iter()
        .map(|r| {
            let channel: Channel = r.channel.parse()?;
            if !channel.is_verbal() {
                return Err(parse_err(&verbal_path, format!("`{channel}` is not a verbal channel")));
            }
            Ok(VerbalLabel {
                slice: r.slice,
                member: r.member,
                channel,
                count: r.count,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ratings = read_csv::<RatingRow>(&dir.join("ratings.csv"))?
        .into_iter()
        .map(|r| RaterScore {
            slice: r.slice,
            member: r.member,
            rater: r.rater,
            score: r.score,
            hit_duration: r.hit_duration,
        })
        .collect();

    let session = SessionLog {
        group_id: meta.group_id,
        members: meta.members,
        turns,
        frames,
        verbal_labels,
        ratings,
        session_length: meta.session_length,
    };
    session.validate()?;
    Ok(session)
}

pub fn read_ratings_csv(path: &Path) -> Result<Vec<RaterScore>> {
    Ok(read_csv::<RatingRow>(path)?
        .into_iter()
        .map(|r| RaterScore {
            slice: r.slice,
            member: r.member,
            rater: r.rater,
            score: r.score,
            hit_duration: r.hit_duration,
        })
        .collect())
}

pub fn read_turns_csv(path: &Path) -> Result<Vec<TurnEvent>> {
    Ok(read_csv::<TurnRow>(path)?
        .into_iter()
        .map(|r| TurnEvent::new(r.speaker, r.start, r.end))
        .collect())
}

struct OrderedChannels<'a>(&'a ChannelVector);

impl Serialize for OrderedChannels<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(N_CHANNELS))?;
        for (c, v) in CHANNELS.iter().zip(self.0) {
            map.serialize_entry(c.name(), v)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct RecordOut<'a> {
    group_id: &'a str,
    member: &'a str,
    slice: usize,
    time: f64,
    channels: OrderedChannels<'a>,
    curiosity: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    group_id: String,
    member: String,
    slice: usize,
    time: f64,
    channels: BTreeMap<String, Option<f64>>,
    curiosity: Option<f64>,
}

pub fn write_panel_jsonl<W: Write>(panels: &[BehaviorPanel], mut out: W) -> Result<()> {
    for panel in panels {
        for series in &panel.members {
            for r in &series.records {
                let rec = RecordOut {
                    group_id: &panel.group_id,
                    member: &series.member,
                    slice: r.slice,
                    time: r.time,
                    channels: OrderedChannels(&r.channels),
                    curiosity: r.curiosity,
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads panels back, grouping records by `group_id` and member in order of
/// first appearance.
pub fn read_panel_jsonl<R: BufRead>(input: R) -> Result<Vec<BehaviorPanel>> {
    let mut panels: Vec<BehaviorPanel> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Parse {
            file: "panel".into(),
            reason: format!("line {}: {reason}", lineno + 1),
        };
        let rec: RecordIn = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let mut channels = [None; N_CHANNELS];
        if rec.channels.len() != N_CHANNELS {
            return Err(bad(format!(
                "expected {N_CHANNELS} channels, found {}",
                rec.channels.len()
            )));
        }
        for (name, v) in rec.channels {
            let c: Channel = name.parse()?;
            channels[c.index()] = v;
        }
        let record = PanelRecord {
            slice: rec.slice,
            time: rec.time,
            channels,
            curiosity: rec.curiosity,
        };
        let panel = match panels.iter_mut().position(|p| p.group_id == rec.group_id) {
            Some(i) => &mut panels[i],
            None => {
                panels.push(BehaviorPanel {
                    group_id: rec.group_id,
                    members: Vec::new(),
                });
                panels.last_mut().unwrap()
            }
        };
        match panel.members.iter_mut().find(|m| m.member == rec.member) {
            Some(series) => series.records.push(record),
            None => panel.members.push(MemberSeries {
                member: rec.member,
                records: vec![record],
            }),
        }
    }
    Ok(panels)
}

pub fn read_panel_file(path: &Path) -> Result<Vec<BehaviorPanel>> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFiles(vec![path.to_path_buf()]),
        _ => Error::Io(e),
    })?;
    read_panel_jsonl(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { reason, .. } => parse_err(path, reason),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{assemble_panel, slice_grid, FeatureEntry};

    fn sample_panel() -> BehaviorPanel {
        let session = SessionLog {
            group_id: "g7".into(),
            members: vec!["b".into(), "a".into()],
            session_length: 25.0,
            ..Default::default()
        };
        let grid = slice_grid(25.0, 10.0).unwrap();
        let f = vec![
            FeatureEntry::new("a", 1, Channel::HeadNod, 0.125),
            FeatureEntry::new("b", 2, Channel::TurnIndegree, 1.0 / 3.0),
        ];
        let cur = vec![("a".to_string(), 0, Some(2.0))];
        assemble_panel(&session, &grid, &f, &cur).unwrap()
    }

    #[test]
    fn panel_round_trip() {
        let panels = vec![sample_panel()];
        let mut buf = Vec::new();
        write_panel_jsonl(&panels, &mut buf).unwrap();
        let back = read_panel_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, panels);
    }

    #[test]
    fn channel_keys_in_canonical_order() {
        let mut buf = Vec::new();
        write_panel_jsonl(&[sample_panel()], &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        let positions: Vec<usize> = CHANNELS
            .iter()
            .map(|c| line.find(&format!("\"{}\":", c.name())).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(line.contains("\"head_nod\":null"));
    }

    #[test]
    fn rejects_short_channel_map() {
        let line = r#"{"group_id":"g","member":"a","slice":0,"time":5.0,"channels":{"joy":1.0},"curiosity":null}"#;
        assert!(read_panel_jsonl(line.as_bytes()).is_err());
    }

    #[test]
    fn empty_session_dir_lists_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        match read_session_dir(dir.path()) {
            Err(Error::MissingFiles(files)) => assert_eq!(files.len(), 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
