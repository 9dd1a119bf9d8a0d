//! Maximum-likelihood fitting of constrained and free multiple-group models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ctpanel_core::BehaviorPanel;

use crate::data::{extract_groups, mean_sd, GroupData};
use crate::error::{Error, Result};
use crate::kalman::group_loglik;
use crate::mat::Mat;
use crate::model::{CtModelSpec, CtParams, GroupParams, Grouping, ParamLayout, Target, Transform};
use crate::optim::{minimize, BfgsConfig, Objective};
use crate::scalar::{Dual, Real};
use crate::standardize::{standardize_groups, StdEffect};

pub const FIT_SCHEMA_VERSION: u32 = 1;

/// Akaike information criterion `2k − 2·loglik`.
pub fn aic(loglik: f64, n_params: usize) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

/// Joint log-likelihood of `groups` as a function of the unconstrained
/// parameter vector of `layout`.
pub struct Problem<'a> {
    pub layout: &'a ParamLayout,
    pub groups: &'a [GroupData],
}

impl<'a> Problem<'a> {
    pub fn new(layout: &'a ParamLayout, groups: &'a [GroupData]) -> Self {
        assert_eq!(layout.n_groups(), groups.len());
        Self { layout, groups }
    }

    pub fn loglik<S: Real + Send + Sync>(&self, theta: &[S]) -> Result<S> {
        let per_group: Vec<Result<S>> = self
            .groups
            .par_iter()
            .enumerate()
            .map(|(g, data)| {
                let params = self.layout.unpack(theta, g);
                group_loglik(&params, data, self.layout.diagonal_drift)
            })
            .collect();
        let mut total = S::zero();
        for r in per_group {
            total += r?;
        }
        Ok(total)
    }

    fn chunk<const N: usize>(&self, theta: &[f64], offset: usize, grad: &mut [f64]) -> Result<f64> {
        let x: Vec<Dual<N>> = theta
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if (offset..offset + N).contains(&i) {
                    Dual::variable(v, i - offset)
                } else {
                    Dual::constant(v)
                }
            })
            .collect();
        let ll = self.loglik(&x)?;
        let width = N.min(theta.len() - offset);
        grad[offset..offset + width].copy_from_slice(&ll.d[..width]);
        Ok(ll.v)
    }

    /// Log-likelihood and its exact gradient by forward-mode differentiation,
    /// seeding at most 64 directions per pass.
    pub fn loglik_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let k = theta.len();
        let mut grad = vec![0.0; k];
        if k == 0 {
            return Ok((self.loglik(theta)?, grad));
        }
        let mut value = 0.0;
        let mut offset = 0;
        while offset < k {
            let rest = k - offset;
            value = match rest {
                0..=8 => self.chunk::<8>(theta, offset, &mut grad)?,
                9..=16 => self.chunk::<16>(theta, offset, &mut grad)?,
                17..=32 => self.chunk::<32>(theta, offset, &mut grad)?,
                _ => self.chunk::<64>(theta, offset, &mut grad)?,
            };
            offset += 64;
        }
        Ok((value, grad))
    }
}

impl Objective for Problem<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.loglik(x).ok().map(|v| -v)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (v, g) = self.loglik_gradient(x).ok()?;
        Some((-v, g.into_iter().map(|d| -d).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    /// Group for per-group parameters; `None` when shared.
    pub group: Option<String>,
    pub estimate: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub group: Option<String>,
    pub start: usize,
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub schema_version: u32,
    pub mode: Grouping,
    pub spec: CtModelSpec,
    pub params: CtParams,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub n_observations: usize,
    pub converged: bool,
    pub iterations: usize,
    pub estimates: Vec<ParamEstimate>,
    pub starts: Vec<StartSummary>,
    pub notes: Vec<String>,
    pub standardized: Option<Vec<StdEffect>>,
}

struct JointFit {
    params: Vec<GroupParams<f64>>,
    loglik: f64,
    n_params: usize,
    converged: bool,
    iterations: usize,
    estimates: Vec<ParamEstimate>,
    starts: Vec<StartSummary>,
}

/// Fits `spec` to behavior panels and attaches standardized effects.
pub fn fit(spec: &CtModelSpec, panels: &[BehaviorPanel]) -> Result<FitResult> {
    spec.validate()?;
    let (groups, missing) = extract_groups(panels, &spec.manifests, &spec.predictors)?;
    let mut result = fit_groups(spec, &groups)?;
    for (name, n) in missing.predictor_zero_filled {
        result
            .notes
            .push(format!("predictor `{name}`: {n} missing values entered as 0"));
    }
    Ok(result)
}

/// Fits `spec` to already extracted group series.
pub fn fit_groups(spec: &CtModelSpec, groups: &[GroupData]) -> Result<FitResult> {
    spec.validate()?;
    if groups.is_empty() {
        return Err(Error::Data("no groups to fit".into()));
    }
    for g in groups {
        if g.subjects.is_empty() {
            return Err(Error::Data(format!("group `{}` has no subjects", g.group_id)));
        }
        for s in &g.subjects {
            s.validate(spec.n_predictor(), spec.n_manifest())?;
        }
    }
    let ids: Vec<String> = groups.iter().map(|g| g.group_id.clone()).collect();
    let (params, loglik, n_params, converged, iterations, estimates, starts) = match spec.grouping {
        Grouping::Constrained => {
            let f = fit_joint(spec, groups, &ids)?;
            (
                f.params,
                f.loglik,
                f.n_params,
                f.converged,
                f.iterations,
                f.estimates,
                f.starts,
            )
        }
        Grouping::Free => {
            let fits: Vec<Result<JointFit>> = groups
                .par_iter()
                .map(|g| fit_joint(spec, std::slice::from_ref(g), std::slice::from_ref(&g.group_id)))
                .collect();
            let mut params = Vec::new();
            let (mut loglik, mut n_params, mut converged, mut iterations) = (0.0, 0, true, 0);
            let (mut estimates, mut starts) = (Vec::new(), Vec::new());
            for (f, id) in fits.into_iter().zip(&ids) {
                let f = f?;
                params.extend(f.params);
                loglik += f.loglik;
                n_params += f.n_params;
                converged &= f.converged;
                iterations = iterations.max(f.iterations);
                estimates.extend(f.estimates.into_iter().map(|mut e| {
                    e.group = Some(id.clone());
                    e
                }));
                starts.extend(f.starts.into_iter().map(|mut s| {
                    s.group = Some(id.clone());
                    s
                }));
            }
            (params, loglik, n_params, converged, iterations, estimates, starts)
        }
    };
    if !converged {
        log::warn!("optimizer did not converge for every group");
    }
    let mut result = FitResult {
        schema_version: FIT_SCHEMA_VERSION,
        mode: spec.grouping,
        spec: spec.clone(),
        params: CtParams {
            latents: spec.latents.clone(),
            manifests: spec.manifests.clone(),
            predictors: spec.predictors.clone(),
            groups: ids.into_iter().zip(params).collect(),
        },
        loglik,
        n_params,
        aic: aic(loglik, n_params),
        n_observations: groups.iter().map(GroupData::n_observations).sum(),
        converged,
        iterations,
        estimates,
        starts,
        notes: spec.notes(),
        standardized: None,
    };
    if !result.converged {
        result
            .notes
            .push("optimizer did not converge; estimates are provisional".into());
    }
    result.standardized = Some(standardize_groups(&result.params, groups)?);
    Ok(result)
}

fn fit_joint(spec: &CtModelSpec, groups: &[GroupData], ids: &[String]) -> Result<JointFit> {
    let layout = ParamLayout::new(spec, ids)?;
    let problem = Problem::new(&layout, groups);
    let opt = &spec.optimizer;
    let x0 = initial_theta(spec, &layout, groups);
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let inits: Vec<Vec<f64>> = (0..opt.starts)
        .map(|s| {
            if s == 0 {
                x0.clone()
            } else {
                perturb(&x0, &layout, &mut rng)
            }
        })
        .collect();
    let cfg = BfgsConfig {
        max_iter: opt.max_iter,
        rel_tol: opt.rel_tol,
        ..Default::default()
    };
    let runs: Vec<_> = inits.par_iter().map(|x| minimize(&problem, x, &cfg)).collect();
    let starts: Vec<StartSummary> = runs
        .iter()
        .enumerate()
        .map(|(s, r)| StartSummary {
            group: None,
            start: s,
            loglik: r.as_ref().map(|r| -r.f),
            iterations: r.as_ref().map_or(0, |r| r.iterations),
            converged: r.as_ref().is_some_and(|r| r.converged),
        })
        .collect();
    let best = runs
        .into_iter()
        .flatten()
        .fold(None::<crate::optim::BfgsResult>, |best, r| match best {
            Some(b) if b.f <= r.f => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::NonFinite("log-likelihood at every starting value"))?;

    let mut params = layout.unpack_all(&best.x);
    if opt.canonicalize {
        canonicalize(&mut params, !spec.free_diffusion_offdiag);
    }
    let theta = layout.encode(&params);
    let params = layout.unpack_all(&theta);
    let loglik = problem.loglik(&theta)?;
    debug_assert!((loglik + best.f).abs() < 1e-6 * (1.0 + loglik.abs()));

    let se = if opt.std_errors {
        standard_errors(&problem, &theta)
    } else {
        None
    };
    let natural = layout.natural_values(&params);
    let estimates = layout
        .slots
        .iter()
        .enumerate()
        .map(|(i, slot)| ParamEstimate {
            name: slot.name.clone(),
            group: slot.group.map(|g| ids[g].clone()),
            estimate: natural[i],
            se: se
                .as_ref()
                .and_then(|v| v[i])
                .map(|s| s * slot.transform.derivative_at(natural[i]).abs()),
        })
        .collect();
    Ok(JointFit {
        params,
        loglik,
        n_params: layout.len(),
        converged: best.converged,
        iterations: best.iterations,
        estimates,
        starts,
    })
}

/// Standard errors on the unconstrained scale from the inverse of the
/// numerically differentiated gradient. `None` when the Hessian is not
/// positive definite.
fn standard_errors(problem: &Problem, theta: &[f64]) -> Option<Vec<Option<f64>>> {
    let k = theta.len();
    let mut h = nalgebra::DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let step = 1e-4 * theta[j].abs().max(1.0);
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[j] += step;
        down[j] -= step;
        let (_, gu) = problem.loglik_gradient(&up).ok()?;
        let (_, gd) = problem.loglik_gradient(&down).ok()?;
        for i in 0..k {
            // Hessian of the negative log-likelihood.
            h[(i, j)] = -(gu[i] - gd[i]) / (2.0 * step);
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let cov = h.cholesky()?.inverse();
    Some(
        (0..k)
            .map(|i| {
                let v = cov[(i, i)];
                (v.is_finite() && v > 0.0).then(|| v.sqrt())
            })
            .collect(),
    )
}

/// Deterministic starting point: drift rates spread around half the inverse
/// median interval, loadings sized so latents explain half the manifest
/// variance, intercepts at the manifest means.
pub fn initial_theta(spec: &CtModelSpec, layout: &ParamLayout, groups: &[GroupData]) -> Vec<f64> {
    let n = spec.n_latent();
    let m = spec.n_manifest();
    let dt = median_of(groups.iter().filter_map(GroupData::median_interval)).unwrap_or(1.0);
    let rates: Vec<f64> = (0..n)
        .map(|j| 0.5 / dt * 2f64.powf(j as f64 - (n as f64 - 1.0) / 2.0))
        .collect();
    let pooled: Vec<(f64, f64)> = (0..m)
        .map(|r| mean_sd(groups.iter().flat_map(|g| g.manifest_values(r))).unwrap_or((0.0, 1.0)))
        .collect();
    let pooled_loading: Vec<f64> = rates
        .iter()
        .map(|rate| {
            let var = (pooled[0].1 * pooled[0].1).max(1e-6);
            (var / (2.0 * n as f64 * (0.5 / rate))).sqrt()
        })
        .collect();
    let regression = smoothed_regression(groups, &rates, spec.n_predictor());
    let params: Vec<GroupParams<f64>> = groups
        .iter()
        .map(|g| {
            let mut p = layout.unpack(&vec![0.0; layout.len()], 0);
            p.drift = Mat::diag(&rates.iter().map(|r| -r).collect::<Vec<_>>());
            for r in 0..m {
                let (_, sd) = g.manifest_stats(r).unwrap_or(pooled[r]);
                let var = (sd * sd).max(1e-6);
                for (j, rate) in rates.iter().enumerate() {
                    // stationary latent variance with unit diffusion is 1/(2·rate)
                    let q = 0.5 / rate;
                    p.loadings[(r, j)] = (var / (2.0 * n as f64 * q)).sqrt();
                }
                p.manifest_intercept[r] = pooled[r].0;
                p.error_var[r] = (pooled[r].1 * pooled[r].1).max(1e-6) / 2.0;
            }
            if let Some((intercept, beta)) = &regression {
                p.manifest_intercept[0] = *intercept;
                for j in 0..n {
                    for c in 0..spec.n_predictor() {
                        p.effects[(j, c)] = beta[j][c] / pooled_loading[j];
                    }
                }
            }
            p
        })
        .collect();
    layout.encode(&params)
}

/// Least-squares fit of the first manifest on each predictor smoothed at
/// each latent's start rate, i.e. the mean structure implied by impulse
/// effects. Returns the intercept and `coef[latent][predictor]`, which
/// estimates loading × effect.
fn smoothed_regression(groups: &[GroupData], rates: &[f64], p: usize) -> Option<(f64, Vec<Vec<f64>>)> {
    let n = rates.len();
    let dim = 1 + n * p;
    let mut xtx = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    let mut xty = nalgebra::DVector::<f64>::zeros(dim);
    let mut rows = 0usize;
    let mut row = vec![0.0; dim];
    for s in groups.iter().flat_map(|g| &g.subjects) {
        let mut z = vec![0.0; n * p];
        for t in 0..s.len() {
            if t > 0 {
                let dt = s.times[t] - s.times[t - 1];
                for j in 0..n {
                    let decay = (-rates[j] * dt).exp();
                    z[j * p..(j + 1) * p].iter_mut().for_each(|v| *v *= decay);
                }
            }
            for j in 0..n {
                for c in 0..p {
                    z[j * p + c] += s.predictors[t][c];
                }
            }
            let Some(y) = s.manifests[t][0] else { continue };
            row[0] = 1.0;
            row[1..].copy_from_slice(&z);
            for a in 0..dim {
                if row[a] == 0.0 {
                    continue;
                }
                xty[a] += row[a] * y;
                for b in 0..dim {
                    xtx[(a, b)] += row[a] * row[b];
                }
            }
            rows += 1;
        }
    }
    if rows <= dim {
        return None;
    }
    let ridge = 1e-6 * (0..dim).map(|i| xtx[(i, i)]).sum::<f64>() / dim as f64;
    for i in 1..dim {
        xtx[(i, i)] += ridge.max(1e-12);
    }
    let beta = xtx.cholesky()?.solve(&xty);
    if beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    let coef = (0..n).map(|j| (0..p).map(|c| beta[1 + j * p + c]).collect()).collect();
    Some((beta[0], coef))
}

fn median_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn perturb(x0: &[f64], layout: &ParamLayout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    x0.iter()
        .zip(&layout.slots)
        .map(|(&x, slot)| {
            let z: f64 = rng.sample(StandardNormal);
            match (slot.target, slot.transform) {
                (_, Transform::NegExp) => x + 0.7 * z,
                (_, Transform::Exp) => x + 0.5 * z,
                (Target::Loading(..), _) => x * rng.random_range(0.3..1.7),
                _ => x + 0.1 * z * x.abs().max(0.1),
            }
        })
        .collect()
}

/// Maps the fitted parameters to a canonical member of their
/// likelihood-equivalence class: each latent's mean loading is made
/// non-negative and, when `sort` is set, latents are ordered slowest first.
pub fn canonicalize(groups: &mut [GroupParams<f64>], sort: bool) {
    let Some(first) = groups.first() else { return };
    let n = first.n_latent();
    let signs: Vec<f64> = (0..n)
        .map(|j| {
            let total: f64 = groups
                .iter()
                .map(|g| (0..g.loadings.nrows()).map(|r| g.loadings[(r, j)]).sum::<f64>())
                .sum();
            if total < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    if sort {
        // Slowest (least negative auto-effect) first; stable for ties.
        order.sort_by(|&a, &b| first.drift[(b, b)].total_cmp(&first.drift[(a, a)]));
    }
    for g in groups.iter_mut() {
        let s = |i: usize| signs[i];
        let flip_sym = |m: &Mat<f64>| Mat::from_fn(n, n, |i, j| s(order[i]) * m[(order[i], order[j])] * s(order[j]));
        g.drift = flip_sym(&g.drift);
        g.diffusion_chol = flip_sym(&g.diffusion_chol);
        g.effects = Mat::from_fn(n, g.effects.ncols(), |i, c| s(order[i]) * g.effects[(order[i], c)]);
        g.loadings = Mat::from_fn(g.loadings.nrows(), n, |r, j| g.loadings[(r, order[j])] * s(order[j]));
        if let Some(b) = &g.cint {
            g.cint = Some((0..n).map(|i| s(order[i]) * b[order[i]]).collect());
        }
        if let Some(mu) = &g.init_mean {
            g.init_mean = Some((0..n).map(|i| s(order[i]) * mu[order[i]]).collect());
        }
        if let Some(l) = &g.init_chol {
            let cov = flip_sym(&l.matmul_t(l));
            g.init_chol = Some(cov.cholesky().unwrap_or_else(|| l.clone()));
        }
    }
}
