//! Per-subject series in the shape the likelihood consumes.

use std::str::FromStr;

use ctpanel_core::{BehaviorPanel, Channel, PanelRecord};

use crate::error::{Error, Result};

/// One member's observation times, predictor values and manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub times: Vec<f64>,
    /// `times.len() × n_predictor`.
    pub predictors: Vec<Vec<f64>>,
    /// `times.len() × n_manifest`; `None` is a missing observation.
    pub manifests: Vec<Vec<Option<f64>>>,
}

impl Subject {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self, n_predictor: usize, n_manifest: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Data(format!("subject `{}`: {m}", self.id)));
        if self.times.len() < 2 {
            return bad("at least two observations required".into());
        }
        if self.predictors.len() != self.times.len() || self.manifests.len() != self.times.len() {
            return bad("series lengths disagree".into());
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return bad("non-finite time".into());
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must be strictly increasing".into());
        }
        for (t, row) in self.predictors.iter().enumerate() {
            if row.len() != n_predictor || row.iter().any(|x| !x.is_finite()) {
                return bad(format!("predictor row {t} malformed"));
            }
        }
        for (t, row) in self.manifests.iter().enumerate() {
            if row.len() != n_manifest || row.iter().flatten().any(|x| !x.is_finite()) {
                return bad(format!("manifest row {t} malformed"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupData {
    pub group_id: String,
    pub subjects: Vec<Subject>,
}

/// Mean and population standard deviation of the present values.
pub fn mean_sd(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

impl GroupData {
    pub fn n_observations(&self) -> usize {
        self.subjects.iter().map(Subject::len).sum()
    }

    pub fn manifest_values(&self, r: usize) -> impl Iterator<Item = f64> + '_ {
        self.subjects
            .iter()
            .flat_map(move |s| s.manifests.iter().filter_map(move |row| row[r]))
    }

    pub fn predictor_values(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.subjects
            .iter()
            .flat_map(move |s| s.predictors.iter().map(move |row| row[c]))
    }

    pub fn manifest_stats(&self, r: usize) -> Option<(f64, f64)> {
        mean_sd(self.manifest_values(r))
    }

    /// Median spacing between consecutive observations.
    pub fn median_interval(&self) -> Option<f64> {
        let mut dts: Vec<f64> = self
            .subjects
            .iter()
            .flat_map(|s| s.times.windows(2).map(|w| w[1] - w[0]))
            .collect();
        if dts.is_empty() {
            return None;
        }
        dts.sort_by(f64::total_cmp);
        Some(dts[dts.len() / 2])
    }
}

/// Column source for a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Curiosity,
    Channel(Channel),
}

impl Source {
    fn parse(name: &str) -> Result<Self> {
        if name == "curiosity" {
            return Ok(Source::Curiosity);
        }
        Channel::from_str(name)
            .map(Source::Channel)
            .map_err(|_| Error::Config(format!("unknown panel variable `{name}`")))
    }

    fn read(self, rec: &PanelRecord) -> Option<f64> {
        match self {
            Source::Curiosity => rec.curiosity,
            Source::Channel(c) => rec.get(c),
        }
    }
}

/// Counts of missing predictor values replaced by 0, by predictor name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MissingLog {
    pub predictor_zero_filled: Vec<(String, usize)>,
}

/// Extracts model series from panels. Missing predictor values enter as 0
/// and are counted; missing manifests stay missing.
pub fn extract_groups(
    panels: &[BehaviorPanel],
    manifests: &[String],
    predictors: &[String],
) -> Result<(Vec<GroupData>, MissingLog)> {
    if panels.is_empty() {
        return Err(Error::Data("no panels given".into()));
    }
    let man: Vec<Source> = manifests.iter().map(|n| Source::parse(n)).collect::<Result<_>>()?;
    let pred: Vec<Source> = predictors.iter().map(|n| Source::parse(n)).collect::<Result<_>>()?;
    let mut zero_filled = vec![0usize; pred.len()];
    let mut groups: Vec<GroupData> = Vec::with_capacity(panels.len());
    for panel in panels {
        if groups.iter().any(|g| g.group_id == panel.group_id) {
            return Err(Error::Data(format!("duplicate group `{}`", panel.group_id)));
        }
        let mut subjects = Vec::with_capacity(panel.members.len());
        for series in &panel.members {
            let mut s = Subject {
                id: format!("{}/{}", panel.group_id, series.member),
                times: Vec::with_capacity(series.records.len()),
                predictors: Vec::with_capacity(series.records.len()),
                manifests: Vec::with_capacity(series.records.len()),
            };
            for rec in &series.records {
                s.times.push(rec.time);
                s.predictors.push(
                    pred.iter()
                        .enumerate()
                        .map(|(c, src)| {
                            src.read(rec).unwrap_or_else(|| {
                                zero_filled[c] += 1;
                                0.0
                            })
                        })
                        .collect(),
                );
                s.manifests.push(man.iter().map(|src| src.read(rec)).collect());
            }
            s.validate(pred.len(), man.len())?;
            subjects.push(s);
        }
        if subjects.is_empty() {
            return Err(Error::Data(format!("group `{}` has no members", panel.group_id)));
        }
        groups.push(GroupData {
            group_id: panel.group_id.clone(),
            subjects,
        });
    }
    let log = MissingLog {
        predictor_zero_filled: predictors
            .iter()
            .cloned()
            .zip(zero_filled)
            .filter(|(_, n)| *n > 0)
            .collect(),
    };
    for (name, n) in &log.predictor_zero_filled {
        log::info!("predictor `{name}`: {n} missing values entered as 0");
    }
    Ok((groups, log))
}
