//! IRLS-type solvers for TLp-regularized sparse recovery.
//!
//! * [`irls_tlp`]: unconstrained `min lambda P_{a,p}(x) + 1/2 ||Ax - y||^2`
//!   with a reweighting outer loop and a DCA inner loop.
//! * [`irls_constrained`]: the equality-constrained modified IRLS.
//! * [`irls_lq_baseline`]: plain IRLS for `lambda ||x||_q^q`, the comparison curve.

mod constrained;
mod dca;
mod irls;
mod linalg;
mod rearrange;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use constrained::{irls_constrained, j_closed_form, j_functional, omega_update};
pub use dca::{dca_subproblem, f_w, grad_f_w, grad_phi_w, phi_w, DcaOutcome, InnerExit, SubproblemWeights};
pub use irls::{irls_lq_baseline, irls_tlp, tlp_weights};
pub use linalg::{ShiftedGram, SolveRoute};
pub use rearrange::{rearrange, tail_magnitude, Rearrangement};

/// Update rule for the `x`-step of the constrained solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XUpdate {
    /// Weighted least squares with every weight frozen at `x^n`.
    #[default]
    Frozen,
    /// Monotone descent on the exact functional over `{Ax = y}`, started at
    /// `x^n`; guarantees the functional never increases.
    Descent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub kappa: f64,
    pub delta_scale: f64,
    /// Target sparsity; must be set (and below `N`) before solving.
    pub s: usize,
    pub c: f64,
    pub eps0: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_tol_step: f64,
    pub outer_tol_mag: f64,
    pub outer_max: usize,
    /// Start each DCA loop from the current outer iterate instead of zero.
    pub warm_start: bool,
    pub route: SolveRoute,
    pub x_update: XUpdate,
    /// Keep every inner `f_w` sequence in the result.
    pub record_inner_traces: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            kappa: 3.0,
            delta_scale: 10.0,
            s: 0,
            c: 1e-2,
            eps0: 1.0,
            inner_tol: 1e-8,
            inner_max: 20,
            outer_tol_step: 1e-8,
            outer_tol_mag: 1e-8,
            outer_max: 2000,
            warm_start: true,
            route: SolveRoute::Auto,
            x_update: XUpdate::Frozen,
            record_inner_traces: false,
        }
    }
}

impl SolverConfig {
    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.s = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("kappa", self.kappa),
            ("delta_scale", self.delta_scale),
            ("c", self.c),
            ("eps0", self.eps0),
            ("inner_tol", self.inner_tol),
            ("outer_tol_step", self.outer_tol_step),
            ("outer_tol_mag", self.outer_tol_mag),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be positive (got {v})")));
            }
        }
        if self.s == 0 {
            return Err(Error::param("target sparsity s must be positive"));
        }
        if self.inner_max == 0 || self.outer_max == 0 {
            return Err(Error::param("iteration caps must be positive"));
        }
        Ok(())
    }

    pub(crate) fn validate_for(&self, a: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        self.validate()?;
        check_dims(a, y)?;
        if self.s >= a.ncols() {
            return Err(Error::param(format!(
                "target sparsity s={} must be below N={}",
                self.s,
                a.ncols()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_dims(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if a.nrows() != y.len() {
        return Err(Error::dims(format!(
            "matrix has {} rows but the measurement vector has length {}",
            a.nrows(),
            y.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    /// `r(x)_{s+1}` fell below `outer_tol_mag` (or the smoothing reached zero).
    SparsityReached,
    /// The outer step criterion fired.
    StepConverged,
    MaxIters,
}

/// Diagnostics of the last inner loop of an unconstrained solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalInner {
    pub exit: InnerExit,
    pub iters: usize,
    /// Relative sup-norm step of the last inner iteration.
    pub step: f64,
    /// `||grad f_w(x_final)||_inf` for the final weights.
    pub grad_inf: f64,
    /// `||A^T y||_inf`, the scale for the stationarity check.
    pub aty_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    pub final_eps: f64,
    /// `lambda P(x^{n+1}) + 1/2 ||A x^{n+1} - y||^2` after every outer step
    /// (for the lq baseline the penalty is `||x||_q^q`).
    pub objective_trace: Vec<f64>,
    /// `J(x^n, omega^n, eps_n)` per outer step (constrained solver only).
    pub j_trace: Vec<f64>,
    /// `P_{a,p}(x^n)` per outer step (constrained solver only).
    pub penalty_trace: Vec<f64>,
    /// `eps_n` used by each outer step.
    pub eps_trace: Vec<f64>,
    /// `||w^n||_inf` per outer step.
    pub weight_sup_trace: Vec<f64>,
    /// Largest relative increase of `f_w` over any inner step; `<= 0` means
    /// every inner sequence was nonincreasing.
    pub max_inner_ascent: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub inner_traces: Vec<Vec<f64>>,
    pub final_inner: Option<FinalInner>,
    pub converged: Convergence,
    pub residual: f64,
}

impl SolveResult {
    pub fn x_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }

    /// `||x - truth||_2 / ||truth||_2`.
    pub fn rel_err(&self, truth: &DVector<f64>) -> f64 {
        relative_error(&self.x_vector(), truth)
    }
}

pub fn relative_error(x: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let denom = truth.norm();
    let diff = (x - truth).norm();
    if denom == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / denom
    }
}

pub(crate) fn sup_norm(x: &DVector<f64>) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
