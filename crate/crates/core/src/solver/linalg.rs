use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `(A^T A + diag(d)) x = A^T z + v` is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveRoute {
    /// Woodbury when `2M <= N`, direct otherwise.
    #[default]
    Auto,
    /// Cholesky of the `N x N` system.
    Direct,
    /// Cholesky of `I_M + A D^{-1} A^T` via the matrix-inversion identity.
    Woodbury,
}

/// `A^T A + diag(d)` for a fixed `A` and positive diagonals `d` that change
/// between factorizations.
pub struct ShiftedGram<'a> {
    a: &'a DMatrix<f64>,
    gram: Option<DMatrix<f64>>,
}

enum Factor {
    Direct(Cholesky<f64, Dyn>),
    Woodbury {
        chol: Cholesky<f64, Dyn>,
        dinv: DVector<f64>,
    },
}

/// A factored system, ready for repeated solves.
pub struct Factored<'a> {
    a: &'a DMatrix<f64>,
    factor: Factor,
}

impl<'a> ShiftedGram<'a> {
    pub fn new(a: &'a DMatrix<f64>, route: SolveRoute) -> Self {
        let woodbury = match route {
            SolveRoute::Auto => 2 * a.nrows() <= a.ncols(),
            SolveRoute::Direct => false,
            SolveRoute::Woodbury => true,
        };
        let gram = (!woodbury).then(|| a.tr_mul(a));
        Self { a, gram }
    }

    pub fn factor(&self, d: &DVector<f64>) -> Result<Factored<'a>> {
        debug_assert_eq!(d.len(), self.a.ncols());
        if d.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let factor = match &self.gram {
            Some(gram) => {
                let mut sys = gram.clone();
                for (i, &di) in d.iter().enumerate() {
                    sys[(i, i)] += di;
                }
                Factor::Direct(Cholesky::new(sys).ok_or(Error::NotPositiveDefinite)?)
            }
            None => {
                let dinv = d.map(|v| 1.0 / v);
                let mut scaled = self.a.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= dinv[j].sqrt();
                }
                let mut inner = &scaled * scaled.transpose();
                for i in 0..inner.nrows() {
                    inner[(i, i)] += 1.0;
                }
                let chol = Cholesky::new(inner).ok_or(Error::NotPositiveDefinite)?;
                Factor::Woodbury { chol, dinv }
            }
        };
        Ok(Factored { a: self.a, factor })
    }
}

impl Factored<'_> {
    /// Solve `(A^T A + D) x = A^T z + v`.
    ///
    /// The Woodbury route evaluates `x = D^{-1} (v + A^T u)` with
    /// `(I + A D^{-1} A^T) u = z - A D^{-1} v`, which never forms `D^{-1} A^T z`.
    pub fn solve(&self, z: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Direct(chol) => {
                let rhs = self.a.tr_mul(z) + v;
                chol.solve(&rhs)
            }
            Factor::Woodbury { chol, dinv } => {
                let dv = v.component_mul(dinv);
                let u = chol.solve(&(z - self.a * dv));
                (v + self.a.tr_mul(&u)).component_mul(dinv)
            }
        }
    }
}
