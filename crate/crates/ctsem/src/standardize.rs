//! Unit-free effect sizes and the ranked link report.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use ctpanel_core::BehaviorPanel;

use crate::data::{extract_groups, mean_sd, GroupData};
use crate::dynamics::stationary_covariance;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::model::CtParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    PredictorToLatent,
    LatentToManifest,
}

/// One standardized effect, summarized across groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdEffect {
    pub kind: EdgeKind,
    pub source: String,
    pub target: String,
    /// Mean of the per-group values; `None` if any group's is missing.
    pub estimate: Option<f64>,
    /// Sample standard deviation across groups (0 for a single group).
    pub sd: Option<f64>,
    pub per_group: Vec<Option<f64>>,
    /// Reason the estimate is missing, if it is.
    pub flag: Option<String>,
}

fn summarize(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let present: Option<Vec<f64>> = values.iter().copied().collect();
    match present {
        Some(v) if !v.is_empty() => {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (Some(mean), Some(sd))
        }
        _ => (None, None),
    }
}

/// Standardized effects of a fit given the data it was fitted to.
pub fn standardize(fit: &FitResult, panels: &[BehaviorPanel]) -> Result<Vec<StdEffect>> {
    if !fit.converged {
        log::warn!("standardizing a fit that did not converge");
    }
    let (groups, _) = extract_groups(panels, &fit.params.manifests, &fit.params.predictors)?;
    standardize_groups(&fit.params, &groups)
}

/// Predictor effects are scaled by the pooled empirical predictor sd over
/// the model-implied stationary latent sd; loadings by the stationary latent
/// sd over the group's empirical manifest sd.
pub fn standardize_groups(params: &CtParams, groups: &[GroupData]) -> Result<Vec<StdEffect>> {
    let ids: Vec<&str> = params.groups.iter().map(|(id, _)| id.as_str()).collect();
    let data: Vec<&GroupData> = ids
        .iter()
        .map(|id| {
            groups
                .iter()
                .find(|g| g.group_id == *id)
                .ok_or_else(|| Error::Data(format!("no data for group `{id}`")))
        })
        .collect::<Result<_>>()?;
    let latent_sd: Vec<Vec<f64>> = params
        .groups
        .iter()
        .map(|(_, p)| {
            let q = stationary_covariance(&p.drift, &p.diffusion())?;
            Ok((0..p.n_latent()).map(|j| q[(j, j)].max(0.0).sqrt()).collect())
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (c, pred) in params.predictors.iter().enumerate() {
        let sd = mean_sd(data.iter().flat_map(|g| g.predictor_values(c))).map_or(0.0, |s| s.1);
        let flag = (sd == 0.0).then(|| {
            log::warn!("predictor `{pred}` has zero variance; its effects are reported missing");
            "zero-variance predictor".to_string()
        });
        for (j, lat) in params.latents.iter().enumerate() {
            let per_group: Vec<Option<f64>> = params
                .groups
                .iter()
                .enumerate()
                .map(|(g, (_, p))| {
                    let lsd = latent_sd[g][j];
                    (flag.is_none() && lsd > 0.0).then(|| p.effects[(j, c)] * sd / lsd)
                })
                .collect();
            let (estimate, spread) = summarize(&per_group);
            out.push(StdEffect {
                kind: EdgeKind::PredictorToLatent,
                source: pred.clone(),
                target: lat.clone(),
                estimate,
                sd: spread,
                per_group,
                flag: flag.clone(),
            });
        }
    }
    for (r, man) in params.manifests.iter().enumerate() {
        let man_sd: Vec<f64> = data.iter().map(|g| g.manifest_stats(r).map_or(0.0, |s| s.1)).collect();
        let flag = man_sd
            .contains(&0.0)
            .then(|| "zero-variance manifest in some group".to_string());
        for (j, lat) in params.latents.iter().enumerate() {
            let per_group: Vec<Option<f64>> = params
                .groups
                .iter()
                .enumerate()
                .map(|(g, (_, p))| (man_sd[g] > 0.0).then(|| p.loadings[(r, j)] * latent_sd[g][j] / man_sd[g]))
                .collect();
            let (estimate, spread) = summarize(&per_group);
            out.push(StdEffect {
                kind: EdgeKind::LatentToManifest,
                source: lat.clone(),
                target: man.clone(),
                estimate,
                sd: spread,
                per_group,
                flag: if estimate.is_none() { flag.clone() } else { None },
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEdge {
    pub kind: EdgeKind,
    pub source: String,
    pub target: String,
    pub estimate: f64,
    pub sd: f64,
    /// 1-based rank within the target.
    pub rank: usize,
}

impl fmt::Display for LinkEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} → {}: {:.3} ± {:.3}",
            self.source, self.target, self.estimate, self.sd
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub edges: Vec<LinkEdge>,
}

/// Ranks edges per target by absolute standardized estimate, ties by source
/// name. Latent targets keep their `top_k` strongest predictors; manifest
/// targets keep every latent.
pub fn rank_links(table: &[StdEffect], top_k: usize) -> LinkReport {
    let mut targets: Vec<(EdgeKind, &str)> = Vec::new();
    for e in table {
        if !targets.contains(&(e.kind, e.target.as_str())) {
            targets.push((e.kind, e.target.as_str()));
        }
    }
    let mut edges = Vec::new();
    for (kind, target) in targets {
        let mut group: Vec<(&StdEffect, f64)> = table
            .iter()
            .filter(|e| e.kind == kind && e.target == target)
            .filter_map(|e| e.estimate.map(|v| (e, v)))
            .collect();
        group.sort_by(|a, b| {
            b.1.abs()
                .partial_cmp(&a.1.abs())
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.source.cmp(&b.0.source))
        });
        let keep = match kind {
            EdgeKind::PredictorToLatent => top_k,
            EdgeKind::LatentToManifest => usize::MAX,
        };
        for (i, (e, v)) in group.into_iter().take(keep).enumerate() {
            edges.push(LinkEdge {
                kind,
                source: e.source.clone(),
                target: e.target.clone(),
                estimate: v,
                sd: e.sd.unwrap_or(0.0),
                rank: i + 1,
            });
        }
    }
    LinkReport { edges }
}
