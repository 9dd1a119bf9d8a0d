//! Reference computations built directly on nalgebra, independent of the
//! engine's own matrix code.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ctpanel_ctsem::mat::Mat;
use ctpanel_ctsem::{GroupParams, Subject};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

/// Stable drift: negative definite symmetric part plus a skew part.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = random_matrix(rng, n, n);
    let c = random_matrix(rng, n, n);
    let shift = rng.random_range(0.05..1.0);
    -(&b * b.transpose()) / n as f64 - DMatrix::identity(n, n) * shift + (&c - c.transpose()) * 0.5
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = random_matrix(rng, n, n);
    &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1
}

/// Van Loan: `exp([[-A, Q], [0, Aᵀ]]·dt)` yields `A_d` and `Q_d` without a
/// Lyapunov solve.
pub fn van_loan(a: &DMatrix<f64>, q: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    m.view_mut((0, n), (n, n)).copy_from(&(q * dt));
    m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let e = m.exp();
    let f22 = e.view((n, n), (n, n)).clone_owned();
    let f12 = e.view((0, n), (n, n)).clone_owned();
    let a_d = f22.transpose();
    let q_d = &a_d * f12;
    (a_d.clone(), (&q_d + q_d.transpose()) * 0.5)
}

/// `∫₀^dt e^{As} ds · b` from the augmented exponential.
pub fn integrated_intercept(a: &DMatrix<f64>, b: &[f64], dt: f64) -> Vec<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    for i in 0..n {
        m[(i, n)] = b[i] * dt;
    }
    let e = m.exp();
    (0..n).map(|i| e[(i, n)]).collect()
}

/// Solves `A X + X Aᵀ + Q = 0` through `(I ⊗ A + A ⊗ I) vec X = −vec Q`.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-q).as_slice());
    let x = k.lu().solve(&rhs).expect("nonsingular");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

pub fn na(m: &Mat<f64>) -> DMatrix<f64> {
    m.to_nalgebra()
}

pub fn mat(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_nalgebra(m)
}

/// Log density of the observed manifests from the joint Gaussian of the
/// whole latent path, assembled transition by transition.
pub fn joint_loglik(params: &GroupParams<f64>, subject: &Subject) -> f64 {
    let t_len = subject.times.len();
    if t_len == 0 {
        return 0.0;
    }
    let a = na(&params.drift);
    let n = a.nrows();
    let g = na(&params.diffusion_chol);
    let q = &g * g.transpose();
    let m_eff = na(&params.effects);
    let lam = na(&params.loadings);
    let b = params.cint.clone().unwrap_or(vec![0.0; n]);

    let mu0 = match (&params.init_mean, &params.cint) {
        (Some(m), _) => DMatrix::from_column_slice(n, 1, m),
        (None, None) => DMatrix::zeros(n, 1),
        (None, Some(b)) => -a.clone().lu().solve(&DMatrix::from_column_slice(n, 1, b)).unwrap(),
    };
    let p0 = match &params.init_chol {
        Some(l) => na(l) * na(l).transpose(),
        None => lyapunov(&a, &q),
    };

    let impulse = |t: usize| &m_eff * DMatrix::from_column_slice(m_eff.ncols(), 1, &subject.predictors[t]);
    let mut means = vec![&mu0 + impulse(0)];
    let mut covs = vec![p0];
    let mut trans = vec![DMatrix::identity(n, n)];
    for t in 1..t_len {
        let dt = subject.times[t] - subject.times[t - 1];
        let (a_d, q_d) = van_loan(&a, &q, dt);
        let b_d = DMatrix::from_column_slice(n, 1, &integrated_intercept(&a, &b, dt));
        means.push(&a_d * &means[t - 1] + b_d + impulse(t));
        covs.push(&a_d * &covs[t - 1] * a_d.transpose() + q_d);
        trans.push(a_d);
    }
    // Cov(η_t, η_s) for s ≤ t is A_d(t)···A_d(s+1) · P_s.
    let cross = |t: usize, s: usize| -> DMatrix<f64> {
        let (t, s, flip) = if t >= s { (t, s, false) } else { (s, t, true) };
        let mut phi = DMatrix::identity(n, n);
        for k in (s + 1..=t).rev() {
            phi *= &trans[k];
        }
        let c = phi * &covs[s];
        if flip {
            c.transpose()
        } else {
            c
        }
    };

    let obs: Vec<(usize, usize, f64)> = (0..t_len)
        .flat_map(|t| {
            subject.manifests[t]
                .iter()
                .enumerate()
                .filter_map(move |(r, y)| y.map(|v| (t, r, v)))
        })
        .collect();
    let k = obs.len();
    if k == 0 {
        return 0.0;
    }
    let mut mean = DMatrix::zeros(k, 1);
    let mut cov = DMatrix::zeros(k, k);
    let mut y = DMatrix::zeros(k, 1);
    for (i, &(t, r, v)) in obs.iter().enumerate() {
        y[i] = v;
        mean[i] = params.manifest_intercept[r] + (lam.row(r) * &means[t])[0];
        for (j, &(s, c, _)) in obs.iter().enumerate() {
            let mut val = (lam.row(r) * cross(t, s) * lam.row(c).transpose())[0];
            if i == j {
                val += params.error_var[r];
            }
            cov[(i, j)] = val;
        }
    }
    let chol = cov.cholesky().expect("observation covariance PD");
    let l = chol.l();
    let resid = y - mean;
    let z = l.solve_lower_triangular(&resid).unwrap();
    let logdet: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + z.norm_squared())
}

/// Random small model with optional free intercept and initial state.
pub fn random_params(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> GroupParams<f64> {
    let mut prm = GroupParams::template(n, m, p);
    prm.drift = mat(&random_stable(rng, n));
    let g = random_matrix(rng, n, n).lower_triangle() * 0.7 + DMatrix::identity(n, n) * 0.5;
    prm.diffusion_chol = mat(&g);
    prm.effects = mat(&random_matrix(rng, n, p));
    prm.loadings = mat(&random_matrix(rng, m, n));
    prm.manifest_intercept = (0..m).map(|_| normal(rng)).collect();
    prm.error_var = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    if rng.random_bool(0.5) {
        prm.cint = Some((0..n).map(|_| normal(rng)).collect());
    }
    if rng.random_bool(0.5) {
        prm.init_mean = Some((0..n).map(|_| normal(rng)).collect());
        let l = random_matrix(rng, n, n).lower_triangle() * 0.5 + DMatrix::identity(n, n);
        prm.init_chol = Some(mat(&l));
    }
    prm
}

/// Random subject of length `t_len` with irregular intervals and roughly a
/// quarter of manifest cells missing.
pub fn random_subject(rng: &mut ChaCha8Rng, t_len: usize, m: usize, p: usize) -> Subject {
    let mut t = 0.0;
    let mut times = Vec::new();
    for _ in 0..t_len {
        t += rng.random_range(0.2..3.0);
        times.push(t);
    }
    Subject {
        id: "s".into(),
        times,
        predictors: (0..t_len)
            .map(|_| {
                (0..p)
                    .map(|_| if rng.random_bool(0.4) { normal(rng) } else { 0.0 })
                    .collect()
            })
            .collect(),
        manifests: (0..t_len)
            .map(|_| {
                (0..m)
                    .map(|_| (!rng.random_bool(0.25)).then(|| normal(rng) * 2.0))
                    .collect()
            })
            .collect(),
    }
}
