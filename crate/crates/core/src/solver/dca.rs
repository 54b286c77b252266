//! DCA for the weighted subproblem
//!
//! ```text
//! f_w(x) = lambda (a+1) sum_i w_i x_i^2 / (a + |x_i|^p) + 1/2 ||Ax - y||^2
//! ```
//!
//! split as `g_w - h_w` with
//! `g_w = lambda (a+1)/a ||x||_w^2 + 1/2 ||Ax - y||^2 + c ||x||^2` and
//! `h_w = lambda (a+1) phi_w(x) + c ||x||^2`, where
//! `phi_w(x) = sum_i w_i |x_i|^(p+2) / (a (a + |x_i|^p))`.
//!
//! The split rests on `t^2/(a+|t|^p) = t^2/a - |t|^(p+2) / (a (a+|t|^p))`;
//! since `phi_w` already carries the `1/a`, its multiplier in `h_w` is
//! `lambda (a+1)`, not `lambda (a+1)/a`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::ShiftedGram;
use super::{sup_norm, SolverConfig};
use crate::error::{Error, Result};
use crate::penalty::{abs_pow, PenaltyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerExit {
    Tolerance,
    MaxIters,
}

/// Per-coordinate weights of one subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemWeights(pub DVector<f64>);

impl SubproblemWeights {
    pub fn new(w: DVector<f64>) -> Result<Self> {
        if w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::param("subproblem weights must be finite and positive"));
        }
        Ok(Self(w))
    }
}

/// `phi_w(x)`.
pub fn phi_w(params: &PenaltyParams, w: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let (a, p) = (params.a(), params.p());
    x.iter()
        .zip(w.iter())
        .map(|(&xi, &wi)| {
            let tp = abs_pow(xi, p);
            wi * tp * xi * xi / (a * (a + tp))
        })
        .sum()
}

/// Gradient of `phi_w`: component `i` is
/// `w_i sign(x_i) |x_i|^(p+1) ((p+2) a + 2|x_i|^p) / (a (a + |x_i|^p)^2)`, and
/// exactly zero at `x_i = 0`.
pub fn grad_phi_w(params: &PenaltyParams, w: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let (a, p) = (params.a(), params.p());
    DVector::from_iterator(
        x.len(),
        x.iter().zip(w.iter()).map(|(&xi, &wi)| {
            if xi == 0.0 {
                return 0.0;
            }
            let tp = abs_pow(xi, p);
            let denom = a * (a + tp) * (a + tp);
            wi * xi * tp * ((p + 2.0) * a + 2.0 * tp) / denom
        }),
    )
}

/// `f_w(x)`.
pub fn f_w(
    a_mat: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &PenaltyParams,
    lambda: f64,
    w: &DVector<f64>,
    x: &DVector<f64>,
) -> f64 {
    let (a, p) = (params.a(), params.p());
    let reg: f64 = x
        .iter()
        .zip(w.iter())
        .map(|(&xi, &wi)| wi * xi * xi / (a + abs_pow(xi, p)))
        .sum();
    lambda * (a + 1.0) * reg + 0.5 * (a_mat * x - y).norm_squared()
}

/// `grad f_w(x) = 2 lambda (a+1)/a W x - lambda (a+1) grad phi_w(x) + A^T (Ax - y)`.
pub fn grad_f_w(
    a_mat: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &PenaltyParams,
    lambda: f64,
    w: &DVector<f64>,
    x: &DVector<f64>,
) -> DVector<f64> {
    let quad = lambda * params.ratio();
    let concave = lambda * (params.a() + 1.0);
    let smooth = a_mat.tr_mul(&(a_mat * x - y));
    let weighted = x.component_mul(w) * (2.0 * quad);
    smooth + weighted - grad_phi_w(params, w, x) * concave
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcaOutcome {
    pub x: DVector<f64>,
    pub iters: usize,
    pub exit: InnerExit,
    /// `f_w(x^0), f_w(x^1), ...`.
    pub trace: Vec<f64>,
    /// Relative sup-norm step of the last iteration.
    pub last_step: f64,
}

impl DcaOutcome {
    /// Largest relative increase between consecutive trace entries.
    pub fn max_ascent(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Run DCA on the subproblem with weights `w` from `x_init`.
///
/// Each step solves
/// `[A^T A + 2c I + 2 lambda (a+1)/a W] x^{k+1} = A^T y + v^k` with
/// `v^k = lambda (a+1) grad phi_w(x^k) + 2c x^k`, and the loop ends when
/// `||x^{k+1} - x^k||_inf / max(||x^{k+1}||_inf, 1) < inner_tol` or after
/// `inner_max` steps.
pub fn dca_subproblem(
    a_mat: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &PenaltyParams,
    w: &SubproblemWeights,
    cfg: &SolverConfig,
    x_init: &DVector<f64>,
) -> Result<DcaOutcome> {
    super::check_dims(a_mat, y)?;
    if x_init.len() != a_mat.ncols() || w.0.len() != a_mat.ncols() {
        return Err(Error::dims("weights and start point must have length N"));
    }
    let gram = ShiftedGram::new(a_mat, cfg.route);
    run_dca(&gram, a_mat, y, params, &w.0, cfg, x_init.clone())
}

pub(super) fn run_dca(
    gram: &ShiftedGram<'_>,
    a_mat: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &PenaltyParams,
    w: &DVector<f64>,
    cfg: &SolverConfig,
    mut x: DVector<f64>,
) -> Result<DcaOutcome> {
    let quad = cfg.lambda * params.ratio();
    let concave = cfg.lambda * (params.a() + 1.0);
    let shift = w.map(|wi| 2.0 * cfg.c + 2.0 * quad * wi);
    // SPD by construction (c > 0, w > 0); a failure here is a bug upstream.
    let system = gram.factor(&shift)?;

    let mut trace = Vec::with_capacity(cfg.inner_max + 1);
    trace.push(f_w(a_mat, y, params, cfg.lambda, w, &x));
    let mut exit = InnerExit::MaxIters;
    let mut last_step = f64::INFINITY;
    let mut iters = 0;
    while iters < cfg.inner_max {
        let v = grad_phi_w(params, w, &x) * concave + &x * (2.0 * cfg.c);
        let next = system.solve(y, &v);
        last_step = sup_norm(&(&next - &x)) / sup_norm(&next).max(1.0);
        x = next;
        iters += 1;
        trace.push(f_w(a_mat, y, params, cfg.lambda, w, &x));
        if last_step < cfg.inner_tol {
            exit = InnerExit::Tolerance;
            break;
        }
    }
    Ok(DcaOutcome {
        x,
        iters,
        exit,
        trace,
        last_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::gen_gaussian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pp(a: f64, p: f64) -> PenaltyParams {
        PenaltyParams::new(a, p).unwrap()
    }

    #[test]
    fn grad_phi_examples() {
        let params = pp(1.0, 1.0);
        let w = DVector::from_element(3, 1.0);
        let g = grad_phi_w(&params, &w, &DVector::zeros(3));
        assert_eq!(g, DVector::zeros(3));
        let g = grad_phi_w(
            &params,
            &DVector::from_element(1, 1.0),
            &DVector::from_element(1, 1.0),
        );
        assert!((g[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn grad_phi_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let params = pp(rng.random_range(0.05..20.0), rng.random_range(0.05..=1.0));
            let n = 5;
            let w = DVector::from_fn(n, |_, _| rng.random_range(0.1..10.0));
            let x = DVector::from_fn(n, |_, _| {
                let m: f64 = rng.random_range(0.1..5.0);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            });
            let g = grad_phi_w(&params, &w, &x);
            let h = 1e-6;
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (phi_w(&params, &w, &xp) - phi_w(&params, &w, &xm)) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1e-12);
                assert!(rel < 1e-6, "component {i}: analytic {} vs fd {fd}", g[i]);
            }
        }
    }

    #[test]
    fn grad_f_matches_direct_form() {
        // d/dt [t^2/(a+|t|^p)] = t (2a + (2-p)|t|^p) / (a+|t|^p)^2
        let a_mat = gen_gaussian(6, 9, 0.0, 5).unwrap().entries;
        let y = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let params = pp(1.7, 0.6);
        let w = DVector::from_fn(9, |i, _| 0.5 + i as f64);
        let x = DVector::from_fn(9, |i, _| (i as f64 * 0.7).sin());
        let lambda = 0.3;
        let g = grad_f_w(&a_mat, &y, &params, lambda, &w, &x);
        let (a, p) = (params.a(), params.p());
        let direct = a_mat.tr_mul(&(&a_mat * &x - &y))
            + DVector::from_fn(9, |i, _| {
                let t = x[i];
                let tp = abs_pow(t, p);
                lambda * (a + 1.0) * w[i] * t * (2.0 * a + (2.0 - p) * tp) / ((a + tp) * (a + tp))
            });
        assert!((g - direct).amax() < 1e-12);
    }

    #[test]
    fn dc_split_reconstructs_f() {
        let a_mat = gen_gaussian(4, 7, 0.0, 8).unwrap().entries;
        let y = DVector::from_fn(4, |i, _| 1.0 + i as f64);
        let params = pp(0.8, 0.4);
        let (lambda, c) = (0.2, 0.05);
        let w = DVector::from_fn(7, |i, _| 1.0 + 0.3 * i as f64);
        let x = DVector::from_fn(7, |i, _| (i as f64).cos() * 2.0);
        let g = lambda * params.ratio() * x.component_mul(&x).dot(&w)
            + 0.5 * (&a_mat * &x - &y).norm_squared()
            + c * x.norm_squared();
        let h = lambda * (params.a() + 1.0) * phi_w(&params, &w, &x) + c * x.norm_squared();
        let f = f_w(&a_mat, &y, &params, lambda, &w, &x);
        assert!((g - h - f).abs() < 1e-12 * f.abs().max(1.0));
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let a_mat = gen_gaussian(5, 10, 0.0, 1).unwrap().entries;
        let y = DVector::zeros(5);
        let w = SubproblemWeights::new(DVector::from_element(10, 1.0)).unwrap();
        let cfg = SolverConfig::default().with_sparsity(1);
        let out = dca_subproblem(&a_mat, &y, &pp(1.0, 0.5), &w, &cfg, &DVector::zeros(10)).unwrap();
        assert_eq!(out.x, DVector::zeros(10));
        assert_eq!(out.exit, InnerExit::Tolerance);
    }

    /// With A = I the subproblem separates; minimize each 1-D objective
    /// `lambda (a+1) w t^2 / (a + |t|^p) + (t - y_i)^2 / 2` on a grid.
    fn grid_minimizer(params: &PenaltyParams, lambda: f64, w: f64, yi: f64) -> f64 {
        let obj = |t: f64| {
            let tp = abs_pow(t, params.p());
            lambda * (params.a() + 1.0) * w * t * t / (params.a() + tp) + 0.5 * (t - yi).powi(2)
        };
        let (lo, hi) = (yi.min(0.0) - 1.0, yi.max(0.0) + 1.0);
        let steps = 400_000;
        (0..=steps)
            .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap()
    }

    #[test]
    fn identity_subproblem_matches_grid_oracle() {
        let a_mat = DMatrix::<f64>::identity(4, 4);
        let y = DVector::from_vec(vec![3.0, 0.0, 0.0, 0.0]);
        let params = pp(1.0, 0.7);
        let w = SubproblemWeights::new(DVector::from_element(4, 1.0)).unwrap();
        let cfg = SolverConfig {
            inner_max: 500,
            ..SolverConfig::default().with_sparsity(1)
        };
        let out = dca_subproblem(&a_mat, &y, &params, &w, &cfg, &DVector::zeros(4)).unwrap();
        for i in 0..4 {
            let oracle = grid_minimizer(&params, cfg.lambda, 1.0, y[i]);
            assert!((out.x[i] - oracle).abs() < 1e-3, "{} vs {oracle}", out.x[i]);
            assert!((out.x[i] - y[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn identity_subproblem_with_strong_penalty() {
        // A larger lambda makes the shrinkage visible; the oracle still decides.
        let a_mat = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![2.0, -0.5, 1.0]);
        let params = pp(2.0, 0.5);
        let lambda = 0.1;
        let w = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let cfg = SolverConfig {
            lambda,
            inner_max: 5000,
            inner_tol: 1e-13,
            ..SolverConfig::default().with_sparsity(1)
        };
        let out = dca_subproblem(
            &a_mat,
            &y,
            &params,
            &SubproblemWeights::new(w.clone()).unwrap(),
            &cfg,
            &y,
        )
        .unwrap();
        for i in 0..3 {
            let oracle = grid_minimizer(&params, lambda, w[i], y[i]);
            assert!(
                (out.x[i] - oracle).abs() < 1e-4,
                "coord {i}: {} vs {oracle}",
                out.x[i]
            );
        }
        assert!(out.max_ascent() <= 1e-10);
    }

    #[test]
    fn descent_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..10 {
            let a_mat = gen_gaussian(12, 24, 0.0, t).unwrap().entries;
            let y = DVector::from_fn(12, |_, _| rng.random_range(-2.0..2.0));
            let w = DVector::from_fn(24, |_, _| rng.random_range(0.01..100.0));
            let params = pp(rng.random_range(0.1..10.0), rng.random_range(0.1..=1.0));
            let cfg = SolverConfig {
                lambda: rng.random_range(1e-4..1.0),
                inner_max: 100,
                ..SolverConfig::default().with_sparsity(1)
            };
            let out = dca_subproblem(
                &a_mat,
                &y,
                &params,
                &SubproblemWeights::new(w).unwrap(),
                &cfg,
                &DVector::zeros(24),
            )
            .unwrap();
            assert!(out.max_ascent() <= 1e-10, "ascent {}", out.max_ascent());
        }
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(SubproblemWeights::new(DVector::from_vec(vec![1.0, 0.0])).is_err());
        assert!(SubproblemWeights::new(DVector::from_vec(vec![1.0, f64::INFINITY])).is_err());
    }
}
