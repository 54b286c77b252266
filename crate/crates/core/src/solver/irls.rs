use nalgebra::{DMatrix, DVector};

use super::dca::{grad_f_w, run_dca, DcaOutcome};
use super::linalg::ShiftedGram;
use super::rearrange::tail_magnitude;
use super::{sup_norm, Convergence, FinalInner, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::penalty::{penalty_lp, penalty_tlp, PenaltyParams};

/// Smoothed reweighting `w_i = (x_i^2 + eps^kappa)^((p-2)/2)`.
pub fn tlp_weights(x: &DVector<f64>, eps: f64, kappa: f64, p: f64) -> DVector<f64> {
    let floor = eps.powf(kappa);
    x.map(|xi| (xi * xi + floor).powf(0.5 * (p - 2.0)))
}

/// Outer-loop bookkeeping shared by the TLp and lq solvers.
struct OuterState {
    x: DVector<f64>,
    eps: f64,
    tail: f64,
}

enum Step {
    Continue,
    Stop(Convergence),
}

impl OuterState {
    fn new(n: usize, eps0: f64, s: usize) -> Self {
        let x = DVector::zeros(n);
        let tail = tail_magnitude(x.as_slice(), s);
        Self { x, eps: eps0, tail }
    }

    /// Accept `next`, shrink `eps`, and apply the stopping rules.
    fn advance(&mut self, next: DVector<f64>, cfg: &SolverConfig) -> Step {
        let tail = tail_magnitude(next.as_slice(), cfg.s);
        let step = (tail - self.tail).abs();
        let prev_tail = self.tail;
        self.x = next;
        self.tail = tail;
        self.eps = self.eps.min(tail / cfg.delta_scale);
        if tail < cfg.outer_tol_mag || self.eps == 0.0 {
            Step::Stop(Convergence::SparsityReached)
        } else if step < cfg.outer_tol_step * prev_tail.max(1.0) {
            Step::Stop(Convergence::StepConverged)
        } else {
            Step::Continue
        }
    }
}

fn finish(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    state: OuterState,
    mut result: SolveResult,
    converged: Convergence,
) -> SolveResult {
    result.residual = (a * &state.x - y).norm();
    result.final_eps = state.eps;
    result.converged = converged;
    result.x = state.x.as_slice().to_vec();
    result
}

fn empty_result(eps0: f64) -> SolveResult {
    SolveResult {
        x: Vec::new(),
        outer_iters: 0,
        total_inner_iters: 0,
        final_eps: eps0,
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
    }
}

/// IRLSTLp for `min lambda P_{a,p}(x) + 1/2 ||Ax - y||^2`.
///
/// Outer step `n`: weights from the current iterate and `eps_n`, a DCA solve
/// of the weighted subproblem, then `eps_{n+1} = min(eps_n, r(x^{n+1})_{s+1} / delta)`.
/// Stops when `r(x)_{s+1} < outer_tol_mag`, when `r(x)_{s+1}` moves by less
/// than `outer_tol_step * max(r_prev, 1)`, or after `outer_max` steps.
pub fn irls_tlp(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &PenaltyParams,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate_for(a, y)?;
    let n = a.ncols();
    let p = params.p();
    let gram = ShiftedGram::new(a, cfg.route);
    let aty_inf = sup_norm(&a.tr_mul(y));

    let mut state = OuterState::new(n, cfg.eps0, cfg.s);
    let mut result = empty_result(cfg.eps0);
    let mut converged = Convergence::MaxIters;
    let mut last: Option<(DVector<f64>, DcaOutcome)> = None;

    while result.outer_iters < cfg.outer_max {
        let w = tlp_weights(&state.x, state.eps, cfg.kappa, p);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        result.eps_trace.push(state.eps);
        result.weight_sup_trace.push(sup_norm(&w));

        let start = if cfg.warm_start {
            state.x.clone()
        } else {
            DVector::zeros(n)
        };
        let inner = run_dca(&gram, a, y, params, &w, cfg, start)?;
        result.total_inner_iters += inner.iters;
        result.max_inner_ascent = result.max_inner_ascent.max(inner.max_ascent());
        if cfg.record_inner_traces {
            result.inner_traces.push(inner.trace.clone());
        }
        result.outer_iters += 1;

        let x_next = inner.x.clone();
        let objective =
            cfg.lambda * penalty_tlp(params, x_next.as_slice()) + 0.5 * (a * &x_next - y).norm_squared();
        result.objective_trace.push(objective);
        last = Some((w, inner));

        if let Step::Stop(why) = state.advance(x_next, cfg) {
            converged = why;
            break;
        }
    }

    if let Some((w, inner)) = last {
        let grad = grad_f_w(a, y, params, cfg.lambda, &w, &state.x);
        result.final_inner = Some(FinalInner {
            exit: inner.exit,
            iters: inner.iters,
            step: inner.last_step,
            grad_inf: sup_norm(&grad),
            aty_inf,
        });
    }
    Ok(finish(a, y, state, result, converged))
}

/// IRLS for `min lambda ||x||_q^q + 1/2 ||Ax - y||^2`: each outer step solves
/// `(A^T A + 2 lambda W) x = A^T y` with `w_i = (x_i^2 + eps^kappa)^((q-2)/2)`.
/// The `eps` schedule and stopping rules match [`irls_tlp`].
pub fn irls_lq_baseline(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    q: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param(format!("q must lie in (0, 1] (got {q})")));
    }
    cfg.validate_for(a, y)?;
    let n = a.ncols();
    let gram = ShiftedGram::new(a, cfg.route);
    let zero = DVector::zeros(n);

    let mut state = OuterState::new(n, cfg.eps0, cfg.s);
    let mut result = empty_result(cfg.eps0);
    let mut converged = Convergence::MaxIters;

    while result.outer_iters < cfg.outer_max {
        let w = tlp_weights(&state.x, state.eps, cfg.kappa, q);
        result.eps_trace.push(state.eps);
        result.weight_sup_trace.push(sup_norm(&w));
        let shift = &w * (2.0 * cfg.lambda);
        let x_next = gram.factor(&shift)?.solve(y, &zero);
        result.outer_iters += 1;
        result.total_inner_iters += 1;
        let objective =
            cfg.lambda * penalty_lp(q, x_next.as_slice()) + 0.5 * (a * &x_next - y).norm_squared();
        result.objective_trace.push(objective);
        if let Step::Stop(why) = state.advance(x_next, cfg) {
            converged = why;
            break;
        }
    }
    Ok(finish(a, y, state, result, converged))
}
