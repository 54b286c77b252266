//! Modified IRLS for `min P_{a,p}(x)` subject to `Ax = y`.
//!
//! The surrogate functional is
//!
//! ```text
//! J(x, omega, eps) = p(a+1)/2 * sum_i [ (x_i^2 + eps^kappa) omega_i / (a + |x_i|^p)^(2/p)
//!                                       + (2-p)/p * omega_i^(-p/(2-p)) ]
//! ```
//!
//! and each step minimizes it over `omega` in closed form, then decreases it
//! over the affine set `{Ax = y}`, then shrinks `eps`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::rearrange::tail_magnitude;
use super::{sup_norm, Convergence, SolveResult, SolverConfig, XUpdate};
use crate::error::{Error, Result};
use crate::penalty::{abs_pow, penalty_tlp, PenaltyParams};

/// `J(x, omega, eps)` evaluated from its definition.
pub fn j_functional(
    params: &PenaltyParams,
    kappa: f64,
    x: &DVector<f64>,
    omega: &DVector<f64>,
    eps: f64,
) -> f64 {
    let (a, p) = (params.a(), params.p());
    let floor = eps.powf(kappa);
    let sum: f64 = x
        .iter()
        .zip(omega.iter())
        .map(|(&xi, &wi)| {
            (xi * xi + floor) * wi / (a + abs_pow(xi, p)).powf(2.0 / p)
                + (2.0 - p) / p * wi.powf(-p / (2.0 - p))
        })
        .sum();
    0.5 * p * (a + 1.0) * sum
}

/// Value of `J` at the optimal `omega`:
/// `(a+1) sum_i (x_i^2 + eps^kappa)^(p/2) / (a + |x_i|^p)`.
pub fn j_closed_form(params: &PenaltyParams, kappa: f64, x: &DVector<f64>, eps: f64) -> f64 {
    let (a, p) = (params.a(), params.p());
    let floor = eps.powf(kappa);
    (a + 1.0)
        * x.iter()
            .map(|&xi| (xi * xi + floor).powf(0.5 * p) / (a + abs_pow(xi, p)))
            .sum::<f64>()
}

/// Minimizer of `J(x, ., eps)`:
/// `omega_i = (x_i^2 + eps^kappa)^((p-2)/2) / (a + |x_i|^p)^(1 - 2/p)`.
pub fn omega_update(params: &PenaltyParams, kappa: f64, x: &DVector<f64>, eps: f64) -> DVector<f64> {
    let (a, p) = (params.a(), params.p());
    let floor = eps.powf(kappa);
    x.map(|xi| (xi * xi + floor).powf(0.5 * (p - 2.0)) / (a + abs_pow(xi, p)).powf(1.0 - 2.0 / p))
}

/// Gradient of `J(., omega, eps)`; zero at coordinates that are exactly 0.
fn j_gradient(
    params: &PenaltyParams,
    kappa: f64,
    x: &DVector<f64>,
    omega: &DVector<f64>,
    eps: f64,
) -> DVector<f64> {
    let (a, p) = (params.a(), params.p());
    let floor = eps.powf(kappa);
    let k = p * (a + 1.0);
    DVector::from_iterator(
        x.len(),
        x.iter().zip(omega.iter()).map(|(&xi, &wi)| {
            if xi == 0.0 {
                return 0.0;
            }
            let ax = xi.abs();
            let tp = abs_pow(xi, p);
            k * wi * xi * (a - floor * ax.powf(p - 2.0)) * (a + tp).powf(-2.0 / p - 1.0)
        }),
    )
}

/// Least-norm solver for `min sum_i x_i^2 / d_i` subject to `Ax = y`:
/// `x = D A^T (A D A^T)^{-1} y`. Once fewer than `M` of the `d_i` are
/// non-negligible the Gram matrix is numerically singular and gets a ridge of
/// `1e-12 * trace`.
fn weighted_least_norm(a: &DMatrix<f64>, y: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j].sqrt();
    }
    let gram = &scaled * scaled.transpose();
    let chol = match Cholesky::new(gram.clone()) {
        Some(c) => c,
        None => {
            let ridge = 1e-12 * gram.trace().max(f64::MIN_POSITIVE);
            let mut reg = gram;
            for i in 0..reg.nrows() {
                reg[(i, i)] += ridge;
            }
            Cholesky::new(reg).ok_or(Error::NotPositiveDefinite)?
        }
    };
    let u = chol.solve(y);
    Ok(a.tr_mul(&u).component_mul(d))
}

/// Orthogonal projector onto `Ker A`, applied as `g - A^T (A A^T)^{-1} A g`.
struct KernelProjector<'a> {
    a: &'a DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> KernelProjector<'a> {
    fn new(a: &'a DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(a * a.transpose()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { a, chol })
    }

    fn project(&self, g: &DVector<f64>) -> DVector<f64> {
        g - self.a.tr_mul(&self.chol.solve(&(self.a * g)))
    }
}

/// Decrease `J(., omega, eps)` over `{Ax = y}` starting from the feasible
/// `x`: a backtracking search toward `candidate`, then projected-gradient
/// steps with an Armijo rule. Never returns a point with a larger `J`.
fn descend(
    params: &PenaltyParams,
    kappa: f64,
    proj: &KernelProjector<'_>,
    x: &DVector<f64>,
    candidate: &DVector<f64>,
    omega: &DVector<f64>,
    eps: f64,
) -> DVector<f64> {
    let j = |v: &DVector<f64>| j_functional(params, kappa, v, omega, eps);
    let mut best = x.clone();
    let mut best_val = j(&best);

    let dir = candidate - x;
    let mut t = 1.0;
    for _ in 0..40 {
        let trial = x + &dir * t;
        let val = j(&trial);
        if val < best_val {
            best = trial;
            best_val = val;
            break;
        }
        t *= 0.5;
    }

    for _ in 0..200 {
        let g = proj.project(&j_gradient(params, kappa, &best, omega, eps));
        let gnorm2 = g.norm_squared();
        if !(gnorm2.is_finite() && gnorm2 > 0.0) {
            break;
        }
        let mut step = sup_norm(&best).max(1.0) / gnorm2.sqrt();
        let mut moved = false;
        for _ in 0..60 {
            let trial = &best - &g * step;
            let val = j(&trial);
            if val <= best_val - 1e-4 * step * gnorm2 {
                let gain = best_val - val;
                best = trial;
                best_val = val;
                moved = gain > 1e-15 * best_val.abs();
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    best
}

/// Modified IRLS for the equality-constrained TLp problem.
///
/// `x^0 = 0`, `eps_0 = cfg.eps0`. Step `n` computes `omega^n`, records
/// `J(x^n, omega^n, eps_n)` and `P_{a,p}(x^n)`, updates `x` according to
/// `cfg.x_update`, sets `eps_{n+1} = min(eps_n, r(x^{n+1})_{s+1} / delta)`, and
/// stops once `||x^{n+1} - x^n||_inf < outer_tol_step`.
///
/// The frozen update solves `min sum_i w_hat_i x_i^2` over `Ax = y` with
/// `w_hat_i = (a+1) w_i / (a + |x_i^n|^p)` and `w_i = (x_i^2 + eps^kappa)^((p-2)/2)`.
pub fn irls_constrained(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &PenaltyParams,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate_for(a, y)?;
    let n = a.ncols();
    let (pa, p) = (params.a(), params.p());
    let proj = match cfg.x_update {
        XUpdate::Descent => Some(KernelProjector::new(a)?),
        XUpdate::Frozen => None,
    };

    let mut x = DVector::zeros(n);
    let mut eps = cfg.eps0;
    let mut result = SolveResult {
        x: Vec::new(),
        outer_iters: 0,
        total_inner_iters: 0,
        final_eps: eps,
        objective_trace: Vec::new(),
        j_trace: Vec::new(),
        penalty_trace: Vec::new(),
        eps_trace: Vec::new(),
        weight_sup_trace: Vec::new(),
        max_inner_ascent: f64::NEG_INFINITY,
        inner_traces: Vec::new(),
        final_inner: None,
        converged: Convergence::MaxIters,
        residual: 0.0,
    };

    while result.outer_iters < cfg.outer_max {
        let omega = omega_update(params, cfg.kappa, &x, eps);
        result.j_trace.push(j_closed_form(params, cfg.kappa, &x, eps));
        result.penalty_trace.push(penalty_tlp(params, x.as_slice()));
        result.eps_trace.push(eps);

        let w = x.map(|xi| (xi * xi + eps.powf(cfg.kappa)).powf(0.5 * (p - 2.0)));
        result.weight_sup_trace.push(sup_norm(&w));
        let d = DVector::from_iterator(
            n,
            x.iter()
                .zip(w.iter())
                .map(|(&xi, &wi)| (pa + abs_pow(xi, p)) / ((pa + 1.0) * wi)),
        );
        let candidate = weighted_least_norm(a, y, &d)?;
        let next = match &proj {
            None => candidate,
            Some(proj) => descend(params, cfg.kappa, proj, &x, &candidate, &omega, eps),
        };

        result.outer_iters += 1;
        result.total_inner_iters += 1;
        result.objective_trace.push(penalty_tlp(params, next.as_slice()));

        let step = sup_norm(&(&next - &x));
        let tail = tail_magnitude(next.as_slice(), cfg.s);
        x = next;
        eps = eps.min(tail / cfg.delta_scale);
        if eps == 0.0 {
            result.converged = Convergence::SparsityReached;
            break;
        }
        if step < cfg.outer_tol_step {
            result.converged = Convergence::StepConverged;
            break;
        }
    }

    result.residual = (a * &x - y).norm();
    result.final_eps = eps;
    result.x = x.as_slice().to_vec();
    Ok(result)
}
