//! Synthetic panels from known parameters and recovery experiments.
//!
//! Randomness comes from ChaCha8 seeded with the design seed; member `i` of
//! group `g` draws from stream `g·members_per_group + i`, so output does not
//! depend on how work is scheduled.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ctpanel_core::{BehaviorPanel, Channel, MemberSeries, PanelRecord, N_CHANNELS};

use crate::dynamics::{discretize_with, stationary_covariance, Discrete};
use crate::error::{Error, Result};
use crate::fit::{canonicalize, fit};
use crate::mat::Mat;
use crate::model::{CtModelSpec, CtParams, GroupParams, Grouping};

/// Per-slice generator for one predictor channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorProcess {
    Bernoulli {
        p: f64,
    },
    Poisson {
        rate: f64,
    },
    /// Uniform draws from an observed pool of values.
    Resample {
        values: Vec<f64>,
    },
    Constant {
        value: f64,
    },
}

impl PredictorProcess {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            PredictorProcess::Bernoulli { p } => (0.0..=1.0).contains(p),
            PredictorProcess::Poisson { rate } => rate.is_finite() && *rate > 0.0,
            PredictorProcess::Resample { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
            PredictorProcess::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid predictor process {self:?}")))
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            PredictorProcess::Bernoulli { p } => {
                if Bernoulli::new(*p).expect("validated").sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            PredictorProcess::Poisson { rate } => Poisson::new(*rate).expect("validated").sample(rng),
            PredictorProcess::Resample { values } => values[rng.random_range(0..values.len())],
            PredictorProcess::Constant { value } => *value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifestMode {
    #[default]
    Continuous,
    /// Scores `0..=thresholds.len()` by counting thresholds below the value.
    Ordinal { thresholds: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub n_groups: usize,
    pub members_per_group: usize,
    pub n_slices: usize,
    /// Seconds per slice; observations sit at slice midpoints.
    pub slice_len: f64,
    /// One entry per group, or a single entry used for every group.
    pub true_params: CtParams,
    /// Aligned with `true_params.predictors`.
    pub predictor_process: Vec<PredictorProcess>,
    #[serde(default)]
    pub manifest: ManifestMode,
    pub seed: u64,
}

enum Column {
    Curiosity,
    Channel(Channel),
}

fn column(name: &str) -> Result<Column> {
    if name == "curiosity" {
        return Ok(Column::Curiosity);
    }
    Channel::from_str(name)
        .map(Column::Channel)
        .map_err(|_| Error::Config(format!("`{name}` is not a panel variable")))
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 || self.members_per_group == 0 || self.n_slices == 0 {
            return Err(Error::Config(
                "n_groups, members_per_group and n_slices must be >= 1".into(),
            ));
        }
        if !(self.slice_len.is_finite() && self.slice_len > 0.0) {
            return Err(Error::Config("slice_len must be positive".into()));
        }
        self.true_params.validate()?;
        let k = self.true_params.groups.len();
        if k != 1 && k != self.n_groups {
            return Err(Error::Config(format!(
                "true_params has {k} groups; expected 1 or {}",
                self.n_groups
            )));
        }
        if self.predictor_process.len() != self.true_params.predictors.len() {
            return Err(Error::Config(
                "predictor_process must list one process per predictor".into(),
            ));
        }
        for p in &self.predictor_process {
            p.validate()?;
        }
        if self.true_params.manifests.len() != 1 {
            return Err(Error::Config("simulation writes exactly one manifest".into()));
        }
        for name in self.true_params.predictors.iter().chain(&self.true_params.manifests) {
            column(name)?;
        }
        if self.true_params.predictors.contains(&self.true_params.manifests[0]) {
            return Err(Error::Config("manifest cannot also be a predictor".into()));
        }
        if let ManifestMode::Ordinal { thresholds } = &self.manifest {
            if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(
                    "ordinal thresholds must be non-empty and increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn group_ids(&self) -> Vec<String> {
        if self.true_params.groups.len() == self.n_groups {
            self.true_params.groups.iter().map(|(id, _)| id.clone()).collect()
        } else {
            (1..=self.n_groups).map(|g| format!("g{g}")).collect()
        }
    }

    /// Generating parameters of group `g`.
    pub fn group_params(&self, g: usize) -> &GroupParams<f64> {
        let groups = &self.true_params.groups;
        &groups[if groups.len() == 1 { 0 } else { g }].1
    }

    /// Generating parameters with one entry per group.
    pub fn expanded_params(&self) -> CtParams {
        CtParams {
            groups: self
                .group_ids()
                .into_iter()
                .enumerate()
                .map(|(g, id)| (id, self.group_params(g).clone()))
                .collect(),
            ..self.true_params.clone()
        }
    }
}

/// Factor `F` with `F·Fᵀ = cov` for a symmetric PSD `cov` (zero allowed).
fn psd_factor(cov: &Mat<f64>) -> Mat<f64> {
    if let Some(l) = cov.cholesky() {
        return l;
    }
    let eig = cov.to_nalgebra().symmetric_eigen();
    let n = cov.nrows();
    Mat::from_fn(n, n, |i, j| {
        eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt()
    })
}

fn draw_normal(factor: &Mat<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let z: Vec<f64> = (0..factor.ncols()).map(|_| rng.sample(StandardNormal)).collect();
    factor.mul_vec(&z)
}

struct GroupSampler {
    params: GroupParams<f64>,
    init_mean: Vec<f64>,
    init_factor: Mat<f64>,
    step: Discrete<f64>,
    step_factor: Mat<f64>,
}

impl GroupSampler {
    fn new(params: &GroupParams<f64>, dt: f64) -> Result<Self> {
        let n = params.n_latent();
        let q_inf = stationary_covariance(&params.drift, &params.diffusion())?;
        let init_mean = match (&params.init_mean, &params.cint) {
            (Some(m), _) => m.clone(),
            (None, None) => vec![0.0; n],
            (None, Some(b)) => params
                .drift
                .solve(&Mat::column(b.iter().map(|x| -x).collect()))
                .ok_or(Error::Singular("stationary mean"))?
                .into_vec(),
        };
        let init_cov = params.init_chol.as_ref().map_or(q_inf.clone(), |l| l.matmul_t(l));
        let step = discretize_with(&params.drift, params.cint.as_deref(), &q_inf, dt, false);
        Ok(Self {
            params: params.clone(),
            init_mean,
            init_factor: psd_factor(&init_cov),
            step_factor: psd_factor(&step.q_d),
            step,
        })
    }
}

/// Simulated panels, one per group, in group order.
pub fn simulate(design: &SimDesign) -> Result<Vec<BehaviorPanel>> {
    design.validate()?;
    let ids = design.group_ids();
    let samplers: Vec<GroupSampler> = (0..design.n_groups)
        .map(|g| GroupSampler::new(design.group_params(g), design.slice_len))
        .collect::<Result<_>>()?;
    let pred_cols: Vec<Channel> = design
        .true_params
        .predictors
        .iter()
        .map(|n| match column(n) {
            Ok(Column::Channel(c)) => c,
            _ => unreachable!("validated"),
        })
        .collect();
    let man_col = column(&design.true_params.manifests[0])?;

    let jobs: Vec<(usize, usize)> = (0..design.n_groups)
        .flat_map(|g| (0..design.members_per_group).map(move |i| (g, i)))
        .collect();
    let series: Vec<MemberSeries> = jobs
        .par_iter()
        .map(|&(g, i)| {
            let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
            rng.set_stream((g * design.members_per_group + i) as u64);
            simulate_member(
                design,
                &samplers[g],
                &pred_cols,
                &man_col,
                &mut rng,
                format!("m{}", i + 1),
            )
        })
        .collect();

    let mut panels: Vec<BehaviorPanel> = ids
        .into_iter()
        .map(|group_id| BehaviorPanel {
            group_id,
            members: Vec::with_capacity(design.members_per_group),
        })
        .collect();
    for ((g, _), s) in jobs.into_iter().zip(series) {
        panels[g].members.push(s);
    }
    Ok(panels)
}

fn simulate_member(
    design: &SimDesign,
    sampler: &GroupSampler,
    pred_cols: &[Channel],
    man_col: &Column,
    rng: &mut ChaCha8Rng,
    member: String,
) -> MemberSeries {
    let p = &sampler.params;
    let mut eta: Vec<f64> = Vec::new();
    let mut records = Vec::with_capacity(design.n_slices);
    for t in 0..design.n_slices {
        let x: Vec<f64> = design.predictor_process.iter().map(|proc| proc.draw(rng)).collect();
        let noise = if t == 0 {
            draw_normal(&sampler.init_factor, rng)
        } else {
            draw_normal(&sampler.step_factor, rng)
        };
        eta = if t == 0 {
            sampler.init_mean.iter().zip(&noise).map(|(m, z)| m + z).collect()
        } else {
            let mut next = sampler.step.a_d.mul_vec(&eta);
            for (k, v) in next.iter_mut().enumerate() {
                *v += sampler.step.b_d[k] + noise[k];
            }
            next
        };
        for (v, u) in eta.iter_mut().zip(p.effects.mul_vec(&x)) {
            *v += u;
        }
        let eps: f64 = rng.sample(StandardNormal);
        let mut y = p.manifest_intercept[0] + p.error_var[0].sqrt() * eps;
        for (j, e) in eta.iter().enumerate() {
            y += p.loadings[(0, j)] * e;
        }
        if let ManifestMode::Ordinal { thresholds } = &design.manifest {
            y = thresholds.iter().filter(|&&c| y > c).count() as f64;
        }
        let mut channels = [None; N_CHANNELS];
        for (c, v) in pred_cols.iter().zip(&x) {
            channels[c.index()] = Some(*v);
        }
        let mut curiosity = None;
        match man_col {
            Column::Curiosity => curiosity = Some(y),
            Column::Channel(c) => channels[c.index()] = Some(y),
        }
        records.push(PanelRecord {
            slice: t,
            time: (t as f64 + 0.5) * design.slice_len,
            channels,
            curiosity,
        });
    }
    MemberSeries { member, records }
}

/// Seed of replicate `r` derived from the master seed.
pub fn replicate_seed(master: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(u64::MAX - r as u64);
    rng.random()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub converged: bool,
    /// Fitted minus true drift diagonal, per latent.
    pub drift_errors: Vec<f64>,
    /// Fitted minus true loading, per group and latent (first manifest).
    pub loading_errors: Vec<Vec<f64>>,
    pub drift_signs_agree: usize,
    pub loading_signs_agree: usize,
    pub n_drift: usize,
    pub n_loading: usize,
    pub aic_constrained: f64,
    pub aic_free: Option<f64>,
    pub free_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n_replicates: usize,
    pub drift_mae: f64,
    pub loading_mae: f64,
    pub drift_sign_rate: f64,
    pub loading_sign_rate: f64,
    pub converged_rate: f64,
    /// Share of replicates where the constrained model has lower AIC;
    /// `None` unless free fits were run.
    pub constrained_wins_rate: Option<f64>,
    pub replicates: Vec<ReplicateResult>,
}

/// Runs `n_replicates` simulate → fit rounds. `spec` supplies latent names,
/// drift form and optimizer settings; its predictors and manifests are taken
/// from the design. With `compare_free`, each replicate is also fitted in
/// free mode for the AIC comparison.
pub fn recovery_experiment(
    design: &SimDesign,
    spec: &CtModelSpec,
    n_replicates: usize,
    compare_free: bool,
) -> Result<RecoveryReport> {
    design.validate()?;
    if n_replicates == 0 {
        return Err(Error::Config("n_replicates must be >= 1".into()));
    }
    let spec = CtModelSpec {
        latents: design.true_params.latents.clone(),
        manifests: design.true_params.manifests.clone(),
        predictors: design.true_params.predictors.clone(),
        grouping: Grouping::Constrained,
        ..spec.clone()
    };
    let mut truth: Vec<GroupParams<f64>> = design.expanded_params().groups.into_iter().map(|(_, p)| p).collect();
    canonicalize(&mut truth, !spec.free_diffusion_offdiag);

    let replicates: Vec<ReplicateResult> = (0..n_replicates)
        .into_par_iter()
        .map(|r| run_replicate(design, &spec, &truth, r, compare_free))
        .collect::<Result<_>>()?;
    let n = replicates.len() as f64;
    let mean_abs = |vals: Vec<f64>| vals.iter().map(|v| v.abs()).sum::<f64>() / vals.len().max(1) as f64;
    let drift_mae = mean_abs(replicates.iter().flat_map(|r| r.drift_errors.clone()).collect());
    let loading_mae = mean_abs(replicates.iter().flat_map(|r| r.loading_errors.concat()).collect());
    let rate = |agree: usize, total: usize| if total == 0 { 1.0 } else { agree as f64 / total as f64 };
    let sum = |f: fn(&ReplicateResult) -> usize| replicates.iter().map(f).sum::<usize>();
    let constrained_wins_rate = compare_free.then(|| {
        replicates
            .iter()
            .filter(|r| r.aic_free.is_some_and(|f| r.aic_constrained < f))
            .count() as f64
            / n
    });
    Ok(RecoveryReport {
        n_replicates,
        drift_mae,
        loading_mae,
        drift_sign_rate: rate(sum(|r| r.drift_signs_agree), sum(|r| r.n_drift)),
        loading_sign_rate: rate(sum(|r| r.loading_signs_agree), sum(|r| r.n_loading)),
        converged_rate: replicates.iter().filter(|r| r.converged).count() as f64 / n,
        constrained_wins_rate,
        replicates,
    })
}

fn run_replicate(
    design: &SimDesign,
    spec: &CtModelSpec,
    truth: &[GroupParams<f64>],
    r: usize,
    compare_free: bool,
) -> Result<ReplicateResult> {
    let seed = replicate_seed(design.seed, r);
    let panels = simulate(&SimDesign { seed, ..design.clone() })?;
    let fitted = fit(spec, &panels)?;
    let n = spec.n_latent();
    let est = &fitted.params.groups;
    let drift_errors: Vec<f64> = (0..n)
        .map(|j| est[0].1.drift[(j, j)] - truth[0].drift[(j, j)])
        .collect();
    let loading_errors: Vec<Vec<f64>> = est
        .iter()
        .zip(truth)
        .map(|((_, e), t)| (0..n).map(|j| e.loadings[(0, j)] - t.loadings[(0, j)]).collect())
        .collect();
    let same_sign = |a: f64, b: f64| a.signum() == b.signum();
    let drift_signs_agree = (0..n)
        .filter(|&j| same_sign(est[0].1.drift[(j, j)], truth[0].drift[(j, j)]))
        .count();
    let loading_signs_agree = est
        .iter()
        .zip(truth)
        .map(|((_, e), t)| {
            (0..n)
                .filter(|&j| same_sign(e.loadings[(0, j)], t.loadings[(0, j)]))
                .count()
        })
        .sum();
    let free = if compare_free {
        Some(fit(
            &CtModelSpec {
                grouping: Grouping::Free,
                ..spec.clone()
            },
            &panels,
        )?)
    } else {
        None
    };
    log::info!(
        "replicate {r}: loglik {:.3}, converged {}",
        fitted.loglik,
        fitted.converged
    );
    Ok(ReplicateResult {
        replicate: r,
        seed,
        converged: fitted.converged,
        drift_errors,
        loading_errors,
        drift_signs_agree,
        loading_signs_agree,
        n_drift: n,
        n_loading: n * truth.len(),
        aic_constrained: fitted.aic,
        aic_free: free.as_ref().map(|f| f.aic),
        free_converged: free.as_ref().map(|f| f.converged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_design(a: f64, diffusion: f64, error: f64, n_slices: usize) -> SimDesign {
        let mut p = GroupParams::template(1, 1, 1);
        p.drift = Mat::from_rows(&[vec![a]]);
        p.diffusion_chol = Mat::from_rows(&[vec![diffusion]]);
        p.loadings = Mat::from_rows(&[vec![1.0]]);
        p.error_var = vec![error];
        SimDesign {
            n_groups: 1,
            members_per_group: 1,
            n_slices,
            slice_len: 10.0,
            true_params: CtParams {
                latents: vec!["a".into()],
                manifests: vec!["curiosity".into()],
                predictors: vec!["joy".into()],
                groups: vec![("g1".into(), p)],
            },
            predictor_process: vec![PredictorProcess::Constant { value: 0.0 }],
            manifest: ManifestMode::Continuous,
            seed: 11,
        }
    }

    #[test]
    fn noiseless_system_stays_at_zero() {
        let panels = simulate(&scalar_design(-0.5, 0.0, 0.0, 50)).unwrap();
        assert!(panels[0].members[0].records.iter().all(|r| r.curiosity == Some(0.0)));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut d = scalar_design(-0.05, 1.0, 0.1, 30);
        d.n_groups = 2;
        d.members_per_group = 3;
        d.predictor_process = vec![PredictorProcess::Poisson { rate: 1.5 }];
        let a = simulate(&d).unwrap();
        let b = simulate(&d).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1].group_id, "g2");
        assert_eq!(a[0].members[2].records[3].time, 35.0);
        d.seed += 1;
        assert_ne!(simulate(&d).unwrap(), a);
    }

    #[test]
    fn ordinal_scores_are_levels() {
        let mut d = scalar_design(-0.05, 1.0, 0.1, 200);
        d.manifest = ManifestMode::Ordinal {
            thresholds: vec![-1.0, 1.0],
        };
        let panels = simulate(&d).unwrap();
        let scores: Vec<f64> = panels[0].members[0]
            .records
            .iter()
            .map(|r| r.curiosity.unwrap())
            .collect();
        assert!(scores.iter().all(|&s| s == 0.0 || s == 1.0 || s == 2.0));
        assert!(scores.contains(&0.0) && scores.contains(&2.0));
    }

    #[test]
    fn invalid_designs_rejected() {
        let mut d = scalar_design(-0.5, 1.0, 0.1, 10);
        d.n_slices = 0;
        assert!(simulate(&d).is_err());
        let mut d = scalar_design(0.5, 1.0, 0.1, 10);
        assert!(simulate(&d).is_err());
        d = scalar_design(-0.5, 1.0, 0.1, 10);
        d.predictor_process.clear();
        assert!(simulate(&d).is_err());
    }

    #[test]
    fn replicate_seeds_differ() {
        assert_ne!(replicate_seed(1, 0), replicate_seed(1, 1));
        assert_eq!(replicate_seed(1, 3), replicate_seed(1, 3));
    }
}
