//! Recovery-guarantee quantities for TLp minimization.
//!
//! With `K = (a+1)/a * gamma`, the root `eta0` of
//!
//! ```text
//! f(eta) = p eta^(2/p) + 2 eta - (2-p) K^(p/(2-p))
//! ```
//!
//! gives `mu0 = K^(-p/(2-p)) eta0` and the RIP bound
//! `delta(p, a, gamma) = mu0 / (2 - p - mu0)`. At `gamma = 1` the bound is the
//! threshold on `delta_2s` under which TLp minimization recovers every
//! `s`-sparse signal exactly, and the stability constants scale the noise
//! level in the stable-recovery error bounds.
//!
//! RIP constants of concrete matrices are never computed here; `delta_2s`
//! is always an input.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::penalty::{penalty_tlp, PenaltyParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RipBound {
    #[serde(skip)]
    pub params: PenaltyParams,
    pub gamma: f64,
    pub eta0: f64,
    pub mu0: f64,
    pub delta_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityConstants {
    pub delta2s: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("gamma must be >= 1 (got {gamma})")))
    }
}

/// `K^(p/(2-p))` with `K = (a+1)/a * gamma`.
fn cone_scale(params: &PenaltyParams, gamma: f64) -> f64 {
    let p = params.p();
    (params.ratio() * gamma).powf(p / (2.0 - p))
}

/// `f(eta)` of the root equation; exposed for residual checks.
pub fn eta_residual(params: &PenaltyParams, gamma: f64, eta: f64) -> f64 {
    let p = params.p();
    p * eta.powf(2.0 / p) + 2.0 * eta - (2.0 - p) * cone_scale(params, gamma)
}

/// Unique positive root `eta0` of the bound equation.
///
/// Bisection on `(0, (1 - p/2) K^(p/(2-p)))` down to a bracket width of
/// `1e-14`, then three Newton steps.
pub fn solve_eta0(params: &PenaltyParams, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let p = params.p();
    let f = |eta: f64| eta_residual(params, gamma, eta);
    let df = |eta: f64| 2.0 * eta.powf(2.0 / p - 1.0) + 2.0;

    let (mut lo, mut hi) = (0.0, (1.0 - 0.5 * p) * cone_scale(params, gamma));
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut eta = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = f(eta) / df(eta);
        let next = eta - step;
        // Newton only polishes; it never leaves the original bracket.
        if next > 0.0 && next.is_finite() {
            eta = next;
        }
    }
    Ok(eta)
}

/// `eta0`, `mu0` and `delta(p, a, gamma)`. At `gamma = 1` the bound is the
/// exact/stable recovery threshold.
pub fn rip_bound(params: &PenaltyParams, gamma: f64) -> Result<RipBound> {
    let eta0 = solve_eta0(params, gamma)?;
    let p = params.p();
    let mu0 = eta0 / cone_scale(params, gamma);
    let delta_bound = mu0 / (2.0 - p - mu0);
    Ok(RipBound {
        params: *params,
        gamma,
        eta0,
        mu0,
        delta_bound,
    })
}

/// Shared shape of the stability constants: `C0` at cone parameter `gamma`.
fn stability_constant(bound: &RipBound, delta2s: f64) -> f64 {
    let p = bound.params.p();
    let mu0 = bound.mu0;
    let gap = bound.delta_bound - delta2s;
    let k = bound.params.ratio() * bound.gamma;
    let numer = (1.0 + delta2s).sqrt() * (1.0 - mu0) * (2.0 - p) + (2.0 - p - mu0) * ((1.0 - p) * gap).sqrt();
    let denom = (2.0 - p - mu0).powi(2) * gap;
    numer / denom * mu0 * (1.0 + k.powf(2.0 / p)).sqrt()
}

/// `C0` for the bound's `gamma`, and `C1`, `C2 = 2 C1` (which use
/// `gamma = 1`), for an assumed RIC `delta2s`.
pub fn stability_constants(bound: &RipBound, delta2s: f64) -> Result<StabilityConstants> {
    if !(delta2s >= 0.0 && delta2s < bound.delta_bound) {
        return Err(Error::param(format!(
            "delta2s must lie in [0, {}) (got {delta2s})",
            bound.delta_bound
        )));
    }
    let c0 = stability_constant(bound, delta2s);
    let unit = if bound.gamma == 1.0 {
        *bound
    } else {
        rip_bound(&bound.params, 1.0)?
    };
    let c1 = stability_constant(&unit, delta2s);
    Ok(StabilityConstants {
        delta2s,
        c0,
        c1,
        c2: 2.0 * c1,
    })
}

/// Smallest admissible normalization `beta >= 1` with `P_{a,p}(x / beta) <= 1`.
pub fn normalization_beta(params: &PenaltyParams, x: &[f64]) -> Result<f64> {
    let support = x.iter().filter(|&&v| v != 0.0).count();
    if support == 0 {
        return Err(Error::param("normalization is undefined for the zero vector"));
    }
    let (a, p) = (params.a(), params.p());
    let sup = x.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let lower = a.powf(-1.0 / p) * sup * ((a + 1.0) * support as f64 - 1.0).powf(1.0 / p);
    let beta = lower.max(1.0);
    debug_assert!({
        let scaled: Vec<f64> = x.iter().map(|v| v / beta).collect();
        penalty_tlp(params, &scaled) <= 1.0 + 1e-12
    });
    Ok(beta)
}
