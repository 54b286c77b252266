//! Sensing matrices, sparse ground-truth signals, and coherence.
//!
//! All generators draw from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with a
//! 64-bit seed, so output is bit-identical across platforms and runs.
//! Independent streams are derived with [`stream_seed`].

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Matrix family and its single parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatrixFamily {
    /// Rows drawn from `N(0, (1-r) I + r J)`.
    Gaussian { r: f64 },
    /// Over-sampled DCT with frequency parameter `f`.
    Dct { f: f64 },
    /// Loaded from a file.
    External,
}

impl MatrixFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixFamily::Gaussian { .. } => "gaussian",
            MatrixFamily::Dct { .. } => "dct",
            MatrixFamily::External => "external",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            MatrixFamily::Gaussian { r } => Some(r),
            MatrixFamily::Dct { f } => Some(f),
            MatrixFamily::External => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MatrixFamily::Gaussian { r } if !(0.0..1.0).contains(&r) => Err(Error::param(format!(
                "correlation r must lie in [0, 1) (got {r})"
            ))),
            MatrixFamily::Dct { f } if !(f.is_finite() && f > 0.0) => {
                Err(Error::param(format!("frequency F must be positive (got {f})")))
            }
            _ => Ok(()),
        }
    }

    /// Draw an `m x n` matrix of this family.
    pub fn generate(&self, m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
        match *self {
            MatrixFamily::Gaussian { r } => gen_gaussian(m, n, r, seed),
            MatrixFamily::Dct { f } => gen_dct(m, n, f, seed),
            MatrixFamily::External => Err(Error::param("external matrices cannot be generated")),
        }
    }
}

impl fmt::Display for MatrixFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(v) => write!(f, "{}({v})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    pub entries: DMatrix<f64>,
    pub family: MatrixFamily,
    pub seed: u64,
}

impl SensingMatrix {
    pub fn external(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::dims("matrix must have at least one row and column"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("matrix entries must be finite"));
        }
        Ok(Self {
            entries,
            family: MatrixFamily::External,
            seed: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Scale every column to unit Euclidean norm.
    pub fn normalize_columns(&mut self) -> Result<()> {
        for (j, mut col) in self.entries.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::ZeroColumn(j));
            }
            col /= norm;
        }
        Ok(())
    }
}

/// Mix a master seed with stream coordinates (splitmix64 finalizer per word)
/// into an independent 64-bit seed.
pub fn stream_seed(master: u64, coords: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    coords.iter().fold(mix(master), |acc, &c| mix(acc ^ mix(c)))
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::dims(format!(
            "matrix dimensions must be positive (got {m}x{n})"
        )));
    }
    Ok(())
}

/// Correlated Gaussian matrix: each row is `sqrt(1-r) z + sqrt(r) g 1` with
/// `z ~ N(0, I_n)` and scalar `g ~ N(0, 1)`, which has covariance
/// `(1-r) I + r J`.
pub fn gen_gaussian(m: usize, n: usize, r: f64, seed: u64) -> Result<SensingMatrix> {
    check_dims(m, n)?;
    let family = MatrixFamily::Gaussian { r };
    family.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (own, shared) = ((1.0 - r).sqrt(), r.sqrt());
    let mut entries = DMatrix::zeros(m, n);
    for i in 0..m {
        let g: f64 = rng.sample(StandardNormal);
        for j in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            entries[(i, j)] = own * z + shared * g;
        }
    }
    Ok(SensingMatrix {
        entries,
        family,
        seed,
    })
}

/// Over-sampled DCT matrix: column `j` (0-based) is
/// `cos(2 pi j omega / F) / sqrt(m)` for one shared `omega ~ U(0,1)^m`.
pub fn gen_dct(m: usize, n: usize, f: f64, seed: u64) -> Result<SensingMatrix> {
    check_dims(m, n)?;
    let family = MatrixFamily::Dct { f };
    family.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let scale = 1.0 / (m as f64).sqrt();
    let entries = DMatrix::from_fn(m, n, |i, j| scale * (2.0 * PI * j as f64 * omega[i] / f).cos());
    Ok(SensingMatrix {
        entries,
        family,
        seed,
    })
}

/// Largest absolute cosine between two distinct columns.
pub fn coherence(a: &DMatrix<f64>) -> Result<f64> {
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let gram = a.transpose() * a;
    let n = a.ncols();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = (gram[(i, j)] / (norms[i] * norms[j])).abs();
            best = best.max(c);
        }
    }
    Ok(best.min(1.0))
}

/// Distribution of the nonzero entries of a generated signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalDist {
    #[default]
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub vector: DVector<f64>,
    /// Ascending support indices.
    pub support: Vec<usize>,
}

impl SparseSignal {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }
}

/// `s`-sparse signal of length `n`: uniform support without replacement and
/// i.i.d. nonzeros from `dist`.
pub fn gen_signal(n: usize, s: usize, seed: u64, dist: SignalDist) -> Result<SparseSignal> {
    if s == 0 || s > n {
        return Err(Error::param(format!(
            "sparsity must satisfy 1 <= s <= N (got s={s}, N={n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut vector = DVector::zeros(n);
    for &i in &support {
        vector[i] = loop {
            let v = match dist {
                SignalDist::Gaussian => rng.sample(StandardNormal),
                SignalDist::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            // A Gaussian draw of exactly 0 would shrink the support.
            if v != 0.0 {
                break v;
            }
        };
    }
    Ok(SparseSignal { vector, support })
}
