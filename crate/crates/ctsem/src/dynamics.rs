//! Exact discretization of linear stochastic latent dynamics
//! `dη = (A·η + b) dt + G dW`.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Real;

/// Discrete-time transition over one interval:
/// `η(t+Δt) = a_d·η(t) + b_d + w`, `w ~ N(0, q_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Discrete<S> {
    pub a_d: Mat<S>,
    pub b_d: Vec<S>,
    pub q_d: Mat<S>,
}

/// Largest real part among the eigenvalues of `a`.
pub fn max_real_eigenvalue(a: &Mat<f64>) -> f64 {
    a.to_nalgebra()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn check_stable(a: &Mat<f64>) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::NonFinite("drift"));
    }
    let max_real = max_real_eigenvalue(a);
    if !(max_real < 0.0) {
        return Err(Error::Unstable { max_real });
    }
    Ok(())
}

/// Solves `A·X + X·Aᵀ + Q = 0` for the stationary latent covariance.
///
/// `diagonal` marks a structurally diagonal drift, for which the solution is
/// elementwise `X_ij = −Q_ij / (a_i + a_j)`; otherwise the `n²` Kronecker-sum
/// system is solved directly.
pub fn stationary_covariance_with<S: Real>(a: &Mat<S>, q: &Mat<S>, diagonal: bool) -> Result<Mat<S>> {
    let n = a.nrows();
    check_stable(&a.values())?;
    if diagonal {
        return Ok(Mat::from_fn(n, n, |i, j| -q[(i, j)] / (a[(i, i)] + a[(j, j)])));
    }
    // Row-major vec: index i·n + j holds X_ij.
    let nn = n * n;
    let mut k = Mat::<S>::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for m in 0..n {
                k[(row, m * n + j)] += a[(i, m)];
                k[(row, i * n + m)] += a[(j, m)];
            }
        }
    }
    let rhs = Mat::column(q.as_slice().iter().map(|&x| -x).collect());
    let x = k.solve(&rhs).ok_or(Error::Singular("Lyapunov system"))?;
    Ok(Mat::from_fn(n, n, |i, j| x[(i * n + j, 0)]).symmetrize())
}

pub fn stationary_covariance(a: &Mat<f64>, q: &Mat<f64>) -> Result<Mat<f64>> {
    stationary_covariance_with(a, q, false)
}

/// Transition over `dt` given the stationary covariance `q_inf` of the same
/// drift. `b = None` means a structurally zero intercept.
pub fn discretize_with<S: Real>(a: &Mat<S>, b: Option<&[S]>, q_inf: &Mat<S>, dt: f64, diagonal: bool) -> Discrete<S> {
    let n = a.nrows();
    if dt == 0.0 {
        return Discrete {
            a_d: Mat::identity(n),
            b_d: vec![S::zero(); n],
            q_d: Mat::zeros(n, n),
        };
    }
    let a_d = if diagonal {
        Mat::from_fn(n, n, |i, j| if i == j { (a[(i, i)] * dt).exp() } else { S::zero() })
    } else {
        a.scale_f64(dt).expm()
    };
    let b_d = match b {
        None => vec![S::zero(); n],
        Some(b) if diagonal => (0..n).map(|i| (a_d[(i, i)] - S::one()) / a[(i, i)] * b[i]).collect(),
        Some(b) => {
            // exp([[A, b], [0, 0]]·dt) carries A⁻¹(e^{A·dt} − I)·b in its last column.
            let mut aug = Mat::<S>::zeros(n + 1, n + 1);
            for i in 0..n {
                for j in 0..n {
                    aug[(i, j)] = a[(i, j)] * dt;
                }
                aug[(i, n)] = b[i] * dt;
            }
            let e = aug.expm();
            (0..n).map(|i| e[(i, n)]).collect()
        }
    };
    let q_d = q_inf.sub(&a_d.sandwich(q_inf)).symmetrize();
    Discrete { a_d, b_d, q_d }
}

/// `exp(A·Δt)`, the integrated intercept and the process-noise covariance
/// over `dt` for drift `a`, intercept `b` and diffusion covariance `q_cont`.
pub fn discretize_dynamics(a: &Mat<f64>, b: &[f64], q_cont: &Mat<f64>, dt: f64) -> Result<Discrete<f64>> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::Config(format!("interval {dt} must be finite and >= 0")));
    }
    if !(a.is_finite() && q_cont.is_finite() && b.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite("dynamics inputs"));
    }
    let n = a.nrows();
    if dt == 0.0 {
        return Ok(discretize_with(a, Some(b), &Mat::zeros(n, n), 0.0, false));
    }
    let q_inf = stationary_covariance(a, q_cont)?;
    Ok(discretize_with(a, Some(b), &q_inf, dt, false))
}
