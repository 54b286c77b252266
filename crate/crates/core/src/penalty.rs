//! The transformed-lp (TLp) penalty and the penalties it is compared against.
//!
//! The scalar TLp function is
//!
//! ```text
//! rho_{a,p}(t) = (a + 1) |t|^p / (a + |t|^p),    a > 0, 0 < p <= 1
//! ```
//!
//! and the vector penalty is its coordinate sum. The relaxation degree of a
//! separable penalty is the Euclidean norm of the point where its unit level
//! set meets the all-equal diagonal; smaller values sit closer to l0.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Shape parameter `a` and exponent `p` of the TLp penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct PenaltyParams {
    a: f64,
    p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    a: f64,
    p: f64,
}

impl TryFrom<RawParams> for PenaltyParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        PenaltyParams::new(raw.a, raw.p)
    }
}

impl PenaltyParams {
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::param(format!("a must be positive (got {a})")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::param(format!("p must lie in (0, 1] (got {p})")));
        }
        Ok(Self { a, p })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `(a + 1) / a`, the factor that recurs throughout the recovery theory.
    pub fn ratio(&self) -> f64 {
        (self.a + 1.0) / self.a
    }
}

/// `|t|^p`, with `0` returned directly at `t = 0` so no `ln(0)` is formed.
#[inline]
pub fn abs_pow(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (p * t.abs().ln()).exp()
    }
}

/// Scalar TLp function `rho_{a,p}(t)`.
#[inline]
pub fn rho(params: &PenaltyParams, t: f64) -> f64 {
    let tp = abs_pow(t, params.p);
    if tp.is_infinite() {
        return params.a + 1.0;
    }
    (params.a + 1.0) * tp / (params.a + tp)
}

/// `P_{a,p}(x) = sum_i rho_{a,p}(x_i)`.
pub fn penalty_tlp(params: &PenaltyParams, x: &[f64]) -> f64 {
    x.iter().map(|&t| rho(params, t)).sum()
}

/// `||x||_p^p`.
pub fn penalty_lp(p: f64, x: &[f64]) -> f64 {
    debug_assert!(p > 0.0 && p <= 1.0);
    x.iter().map(|&t| abs_pow(t, p)).sum()
}

/// The l_a^p pseudo-norm `sum_i [(a+1)|x_i| / (a+|x_i|)]^p`: the exponent is
/// applied outside the TL1 ratio instead of inside it.
pub fn penalty_lap(params: &PenaltyParams, x: &[f64]) -> f64 {
    let a = params.a;
    x.iter()
        .map(|&t| {
            let u = t.abs();
            if u.is_infinite() {
                return abs_pow(a + 1.0, params.p);
            }
            abs_pow((a + 1.0) * u / (a + u), params.p)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Tlp,
    Lp,
    Lap,
}

impl PenaltyKind {
    pub fn evaluate(&self, params: &PenaltyParams, x: &[f64]) -> f64 {
        match self {
            PenaltyKind::Tlp => penalty_tlp(params, x),
            PenaltyKind::Lp => penalty_lp(params.p, x),
            PenaltyKind::Lap => penalty_lap(params, x),
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyKind::Tlp => "tlp",
            PenaltyKind::Lp => "lp",
            PenaltyKind::Lap => "lap",
        })
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tlp" => Ok(PenaltyKind::Tlp),
            "lp" => Ok(PenaltyKind::Lp),
            "lap" => Ok(PenaltyKind::Lap),
            other => Err(Error::param(format!(
                "unknown penalty kind {other:?} (expected tlp, lp or lap)"
            ))),
        }
    }
}

/// Closed-form relaxation degree in dimension `n`.
///
/// `Lp` ignores `a`.
pub fn relaxation_degree(kind: PenaltyKind, params: &PenaltyParams, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("dimension N must be at least 1"));
    }
    let (a, p) = (params.a, params.p);
    let nf = n as f64;
    let rd = match kind {
        PenaltyKind::Tlp => (a / ((a + 1.0) * nf - 1.0)).powf(1.0 / p) * nf.sqrt(),
        PenaltyKind::Lp => nf.powf(0.5 - 1.0 / p),
        PenaltyKind::Lap => a / ((a + 1.0) * nf.powf(1.0 / p) - 1.0) * nf.sqrt(),
    };
    Ok(rd)
}

/// Relaxation degree found numerically: bisect for the diagonal point
/// `(t, ..., t)` on the unit level set, then return `sqrt(N) t`.
///
/// The root is bracketed in `(0, 1]` because every supported penalty is
/// zero at the origin and at least `N >= 1` at the all-ones vector. The
/// bisection runs until the bracket can no longer be split in floating point.
pub fn rd_numeric_oracle(kind: PenaltyKind, params: &PenaltyParams, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("dimension N must be at least 1"));
    }
    let level = |t: f64| kind.evaluate(params, &vec![t; n]) - 1.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if level(lo) >= 0.0 || level(hi) < 0.0 {
        return Err(Error::Bracket { lo, hi });
    }
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if level(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((n as f64).sqrt() * 0.5 * (lo + hi))
}
