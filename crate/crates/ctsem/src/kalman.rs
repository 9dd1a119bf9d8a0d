//! Kalman-filter log-likelihood of a group's subjects.
//!
//! The covariance recursion depends only on the observation intervals and
//! the missingness pattern, not on the observed values or predictors. It is
//! computed once per distinct pattern and shared by every subject with that
//! pattern, leaving a cheap mean recursion per subject.

use std::collections::HashMap;

use crate::data::{GroupData, Subject};
use crate::dynamics::{discretize_with, stationary_covariance_with, Discrete};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::GroupParams;
use crate::scalar::Real;

const LN_2PI: f64 = 1.8378770664093453;

/// Lower bound applied to filtered variances to keep the recursion PSD.
pub const VARIANCE_FLOOR: f64 = 1e-10;

type PatternKey = Vec<(u64, u64)>;

struct Step<S> {
    /// Index into the discretization cache; `None` for the first observation.
    disc: Option<usize>,
    observed: Vec<usize>,
    gain: Mat<S>,
    s_inv: Mat<S>,
    logdet: S,
    filtered_cov: Option<Mat<S>>,
}

struct CovPath<S> {
    steps: Vec<Step<S>>,
    floor_hits: usize,
}

struct Context<'p, S> {
    params: &'p GroupParams<S>,
    q_inf: Mat<S>,
    mu0: Vec<S>,
    p0: Mat<S>,
    diagonal: bool,
    discs: Vec<(f64, Discrete<S>)>,
}

impl<'p, S: Real> Context<'p, S> {
    fn new(params: &'p GroupParams<S>, diagonal: bool) -> Result<Self> {
        let n = params.n_latent();
        if !(params.drift.is_finite() && params.effects.is_finite() && params.loadings.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        let q = params.diffusion();
        let q_inf = stationary_covariance_with(&params.drift, &q, diagonal)?;
        let mu0 = match (&params.init_mean, &params.cint) {
            (Some(m), _) => m.clone(),
            (None, None) => vec![S::zero(); n],
            (None, Some(b)) => {
                let rhs = Mat::column(b.iter().map(|&x| -x).collect());
                params
                    .drift
                    .solve(&rhs)
                    .ok_or(Error::Singular("stationary mean"))?
                    .into_vec()
            }
        };
        let p0 = match &params.init_chol {
            Some(l) => l.matmul_t(l),
            None => q_inf.clone(),
        };
        Ok(Self {
            params,
            q_inf,
            mu0,
            p0,
            diagonal,
            discs: Vec::new(),
        })
    }

    fn disc_index(&mut self, dt: f64) -> usize {
        if let Some(i) = self.discs.iter().position(|(d, _)| *d == dt) {
            return i;
        }
        let d = discretize_with(
            &self.params.drift,
            self.params.cint.as_deref(),
            &self.q_inf,
            dt,
            self.diagonal,
        );
        self.discs.push((dt, d));
        self.discs.len() - 1
    }

    fn cov_path(&mut self, subject: &Subject, keep_cov: bool) -> Result<CovPath<S>> {
        let n = self.params.n_latent();
        let mut steps = Vec::with_capacity(subject.len());
        let mut p = self.p0.clone();
        let mut floor_hits = 0;
        for t in 0..subject.len() {
            let disc = if t == 0 {
                None
            } else {
                let idx = self.disc_index(subject.times[t] - subject.times[t - 1]);
                let d = &self.discs[idx].1;
                p = if self.diagonal {
                    Mat::from_fn(n, n, |i, j| d.a_d[(i, i)] * p[(i, j)] * d.a_d[(j, j)] + d.q_d[(i, j)])
                } else {
                    d.a_d.sandwich(&p).add(&d.q_d).symmetrize()
                };
                Some(idx)
            };
            let observed: Vec<usize> = subject.manifests[t]
                .iter()
                .enumerate()
                .filter_map(|(r, y)| y.map(|_| r))
                .collect();
            let k = observed.len();
            let (gain, s_inv, logdet) = if k == 0 {
                (Mat::zeros(n, 0), Mat::zeros(0, 0), S::zero())
            } else {
                let lam = Mat::from_fn(k, n, |r, j| self.params.loadings[(observed[r], j)]);
                let pl = p.matmul_t(&lam); // P·Λᵀ, n × k
                let mut s = lam.matmul(&pl);
                for (r, &o) in observed.iter().enumerate() {
                    s[(r, r)] += self.params.error_var[o];
                }
                let s = s.symmetrize();
                let chol = s.cholesky().ok_or_else(|| Error::NonPsdInnovation {
                    subject: subject.id.clone(),
                    slice: t,
                })?;
                let mut logdet = S::zero();
                for r in 0..k {
                    logdet += chol[(r, r)].ln();
                }
                logdet = logdet * 2.0;
                let s_inv = s
                    .solve(&Mat::identity(k))
                    .ok_or(Error::Singular("innovation covariance"))?
                    .symmetrize();
                let gain = pl.matmul(&s_inv);
                // P ← P − K·Λ·P = P − K·(P·Λᵀ)ᵀ
                p = p.sub(&gain.matmul_t(&pl)).symmetrize();
                for i in 0..n {
                    let v = p[(i, i)].value();
                    if v < VARIANCE_FLOOR {
                        p[(i, i)] += S::cst(VARIANCE_FLOOR - v);
                        floor_hits += 1;
                    }
                }
                (gain, s_inv, logdet)
            };
            steps.push(Step {
                disc,
                observed,
                gain,
                s_inv,
                logdet,
                filtered_cov: keep_cov.then(|| p.clone()),
            });
        }
        if floor_hits > 0 {
            log::debug!("{}: variance floor applied {floor_hits} times", subject.id);
        }
        Ok(CovPath { steps, floor_hits })
    }

    /// Mean recursion along a precomputed covariance path. Returns the
    /// log-likelihood and, if requested, the filtered means.
    fn mean_pass(&self, path: &CovPath<S>, subject: &Subject, keep_means: bool) -> (S, Vec<Vec<S>>) {
        let prm = self.params;
        let mut x = self.mu0.clone();
        let mut ll = S::zero();
        let mut means = Vec::new();
        for (t, step) in path.steps.iter().enumerate() {
            if let Some(idx) = step.disc {
                let d = &self.discs[idx].1;
                if self.diagonal {
                    for (i, v) in x.iter_mut().enumerate() {
                        *v = d.a_d[(i, i)] * *v + d.b_d[i];
                    }
                } else {
                    let mut next = d.a_d.mul_vec(&x);
                    for (v, b) in next.iter_mut().zip(&d.b_d) {
                        *v += *b;
                    }
                    x = next;
                }
            }
            let impulse = prm.effects.mul_vec_f64(&subject.predictors[t]);
            for (v, u) in x.iter_mut().zip(impulse) {
                *v += u;
            }
            let k = step.observed.len();
            if k > 0 {
                let e: Vec<S> = step
                    .observed
                    .iter()
                    .map(|&r| {
                        let mut pred = prm.manifest_intercept[r];
                        for (j, xj) in x.iter().enumerate() {
                            pred += prm.loadings[(r, j)] * *xj;
                        }
                        -pred + subject.manifests[t][r].expect("observed")
                    })
                    .collect();
                let se = step.s_inv.mul_vec(&e);
                let mut quad = S::zero();
                for (a, b) in e.iter().zip(&se) {
                    quad += *a * *b;
                }
                ll += (step.logdet + quad + LN_2PI * k as f64) * -0.5;
                let dx = step.gain.mul_vec(&e);
                for (v, u) in x.iter_mut().zip(dx) {
                    *v += u;
                }
            }
            if keep_means {
                means.push(x.clone());
            }
        }
        (ll, means)
    }
}

fn pattern_key(subject: &Subject) -> PatternKey {
    (0..subject.len())
        .map(|t| {
            let dt = if t == 0 {
                0.0
            } else {
                subject.times[t] - subject.times[t - 1]
            };
            let mask =
                subject.manifests[t]
                    .iter()
                    .enumerate()
                    .fold(0u64, |m, (r, y)| if y.is_some() { m | (1 << (r % 64)) } else { m });
            (dt.to_bits(), mask)
        })
        .collect()
}

/// Total log-likelihood of every subject in `data` under `params`.
/// `diagonal` must be true only for a structurally diagonal drift.
pub fn group_loglik<S: Real>(params: &GroupParams<S>, data: &GroupData, diagonal: bool) -> Result<S> {
    let mut ctx = Context::new(params, diagonal)?;
    let mut paths: HashMap<PatternKey, CovPath<S>> = HashMap::new();
    let mut total = S::zero();
    for subject in &data.subjects {
        let key = pattern_key(subject);
        if !paths.contains_key(&key) {
            let path = ctx.cov_path(subject, false)?;
            paths.insert(key.clone(), path);
        }
        let (ll, _) = ctx.mean_pass(&paths[&key], subject, false);
        total += ll;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("log-likelihood"));
    }
    Ok(total)
}

/// Filtered states of a single subject.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput {
    pub loglik: f64,
    pub filtered_means: Vec<Vec<f64>>,
    pub filtered_covs: Vec<Mat<f64>>,
    /// How often the variance floor had to be applied.
    pub floor_hits: usize,
}

pub fn kalman_filter(params: &GroupParams<f64>, subject: &Subject, diagonal: bool) -> Result<KalmanOutput> {
    let mut ctx = Context::new(params, diagonal)?;
    let path = ctx.cov_path(subject, true)?;
    let (loglik, filtered_means) = ctx.mean_pass(&path, subject, true);
    if !loglik.is_finite() {
        return Err(Error::NonFinite("log-likelihood"));
    }
    Ok(KalmanOutput {
        loglik,
        filtered_means,
        filtered_covs: path.steps.into_iter().map(|s| s.filtered_cov.expect("kept")).collect(),
        floor_hits: path.floor_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(a: f64, lambda: f64, theta: f64) -> GroupParams<f64> {
        let mut p = GroupParams::template(1, 1, 1);
        p.drift = Mat::from_rows(&[vec![a]]);
        p.loadings = Mat::from_rows(&[vec![lambda]]);
        p.error_var = vec![theta];
        p
    }

    fn subject(ys: &[Option<f64>], dt: f64) -> Subject {
        Subject {
            id: "s".into(),
            times: (0..ys.len()).map(|t| t as f64 * dt).collect(),
            predictors: vec![vec![0.0]; ys.len()],
            manifests: ys.iter().map(|y| vec![*y]).collect(),
        }
    }

    #[test]
    fn single_observation_is_marginal_normal() {
        // η ~ N(0, 1/(2·0.5)) = N(0, 1); y = η + ε, var 1 + 0.5
        let p = scalar_params(-0.5, 1.0, 0.5);
        let out = kalman_filter(&p, &subject(&[Some(0.3)], 1.0), false).unwrap();
        let v: f64 = 1.5;
        let expected = -0.5 * (LN_2PI + v.ln() + 0.09 / v);
        assert!((out.loglik - expected).abs() < 1e-14);
    }

    #[test]
    fn missing_observation_skips_update() {
        let p = scalar_params(-0.5, 1.0, 0.5);
        let all_missing = kalman_filter(&p, &subject(&[None, None], 1.0), false).unwrap();
        assert_eq!(all_missing.loglik, 0.0);
        assert!((all_missing.filtered_covs[1][(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shared_paths_match_individual_filters() {
        let p = scalar_params(-0.2, 0.8, 0.3);
        let subjects = vec![
            subject(&[Some(0.1), Some(-0.4), None, Some(1.0)], 2.0),
            subject(&[Some(0.5), Some(0.2), None, Some(-0.3)], 2.0),
            subject(&[None, Some(0.2), Some(0.7), Some(-0.3)], 2.0),
        ];
        let individual: f64 = subjects
            .iter()
            .map(|s| kalman_filter(&p, s, false).unwrap().loglik)
            .sum();
        let group = GroupData {
            group_id: "g".into(),
            subjects,
        };
        let joint = group_loglik(&p, &group, false).unwrap();
        assert!((joint - individual).abs() < 1e-12);
    }

    #[test]
    fn singular_innovation_reported() {
        let p = scalar_params(-0.5, 0.0, 0.0);
        let err = kalman_filter(&p, &subject(&[Some(1.0)], 1.0), false).unwrap_err();
        assert!(matches!(err, Error::NonPsdInnovation { slice: 0, .. }));
    }
}
