//! Quasi-Newton minimization with backtracking line search.

/// Function to minimize. `None` marks an infeasible point (treated as +∞).
pub trait Objective {
    fn value(&self, x: &[f64]) -> Option<f64>;
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsConfig {
    pub max_iter: usize,
    /// Relative change in the objective regarded as no progress.
    pub rel_tol: f64,
    /// Consecutive small-change iterations required to stop.
    pub patience: usize,
    pub grad_tol: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            rel_tol: 1e-7,
            patience: 2,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `obj` from `x0`. Returns `None` if `x0` itself is infeasible.
pub fn minimize(obj: &impl Objective, x0: &[f64], cfg: &BfgsConfig) -> Option<BfgsResult> {
    let n = x0.len();
    let (mut f, mut g) = obj.value_and_gradient(x0)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut x = x0.to_vec();
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut scaled = false;
    let mut quiet = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        if inf_norm(&g) < cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // Lost descent: restart from steepest descent.
            h = identity(n);
            scaled = false;
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let Some((step, f_new, x_new)) = line_search(obj, &x, f, &dir, slope) else {
            if scaled {
                h = identity(n);
                scaled = false;
                continue;
            }
            // No decrease along steepest descent: stationary to precision.
            converged = inf_norm(&g) < 1e-3 * (1.0 + f.abs());
            break;
        };
        let Some((f_chk, g_new)) = obj.value_and_gradient(&x_new) else {
            break;
        };
        debug_assert!((f_chk - f_new).abs() <= 1e-8 * (1.0 + f_new.abs()));
        let s: Vec<f64> = dir.iter().map(|d| d * step).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let rel = (f - f_new).abs() / f.abs().max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if rel < cfg.rel_tol {
            quiet += 1;
            if quiet >= cfg.patience {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Some(BfgsResult {
        x,
        f,
        grad: g,
        iterations,
        converged,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let c = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Armijo backtracking on values only.
fn line_search(obj: &impl Objective, x: &[f64], f: f64, dir: &[f64], slope: f64) -> Option<(f64, f64, Vec<f64>)> {
    const C1: f64 = 1e-4;
    let mut step = 1.0;
    // Keep the first trial step bounded in the unconstrained coordinates.
    let max_move = inf_norm(dir);
    if max_move > 5.0 {
        step = 5.0 / max_move;
    }
    for _ in 0..40 {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        if let Some(ft) = obj.value(&trial) {
            if ft.is_finite() && ft <= f + C1 * step * slope {
                return Some((step, ft, trial));
            }
        }
        step *= 0.5;
    }
    None
}
