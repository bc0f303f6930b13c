//! Dense matrix functions: exponential, real-base powers, the logarithm of
//! `-T`, generic analytic functions and the incomplete gamma function.

mod expm;
mod gamma;
mod parlett;

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(crate) use expm::check_square_finite;
pub use expm::mat_exp;
pub use gamma::{upper_inc_gamma, upper_inc_gamma_mat, ScaledUpperGamma, UpperGamma};
pub use parlett::{Exp, FnScalar, Log, MatFunConfig, Power, ScalarFunction, SchurParlett, TaylorScalar};

use crate::error::{domain, Error, Result};

/// A validated sub-intensity matrix: nonnegative off-diagonal, negative
/// diagonal, nonpositive row sums and invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct SubIntensityMatrix(DMatrix<f64>);

impl SubIntensityMatrix {
    pub fn new(t: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&t)?;
        let n = t.nrows();
        let scale = t.amax().max(1.0);
        let tol = 1e-12 * scale;
        for i in 0..n {
            if t[(i, i)] >= 0.0 {
                return Err(Error::Validation {
                    constraint: format!("diagonal entry T[{i},{i}] = {} must be negative", t[(i, i)]),
                });
            }
            let mut row = 0.0;
            for j in 0..n {
                row += t[(i, j)];
                if i != j && t[(i, j)] < 0.0 {
                    return Err(Error::Validation {
                        constraint: format!("off-diagonal entry T[{i},{j}] = {} must be nonnegative", t[(i, j)]),
                    });
                }
            }
            if row > tol {
                return Err(Error::Validation {
                    constraint: format!("row {i} of T sums to {row} > 0"),
                });
            }
        }
        check_invertible(&t)?;
        Ok(Self(t))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Exit-rate vector `t = -T e`.
    pub fn exit_vector(&self) -> DVector<f64> {
        exit_vector(&self.0)
    }
}

impl Deref for SubIntensityMatrix {
    type Target = DMatrix<f64>;
    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `-T e`, clipped at zero for entries that are negative by round-off only.
pub(crate) fn exit_vector(t: &DMatrix<f64>) -> DVector<f64> {
    let scale = t.amax().max(1.0);
    DVector::from_iterator(
        t.nrows(),
        t.row_iter().map(|r| {
            let v = -r.sum();
            if v < 0.0 && v > -1e-12 * scale {
                0.0
            } else {
                v
            }
        }),
    )
}

/// Fails unless `T x = e` has a finite, well-conditioned solution.
pub(crate) fn check_invertible(t: &DMatrix<f64>) -> Result<()> {
    let n = t.nrows();
    let lu = t.clone().lu();
    let x = lu
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| Error::Singular("T x = e has no solution".into()))?;
    let growth = x.amax() * t.amax();
    if !growth.is_finite() || growth > 1e14 {
        return Err(Error::Singular(format!(
            "T is numerically singular (solution growth {growth:e})"
        )));
    }
    Ok(())
}

/// `x^A = exp(ln(x) A)` for `x > 0`.
pub fn mat_power_base(x: f64, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(x > 0.0 && x.is_finite()) {
        return domain(format!("matrix power base must be positive, got {x}"));
    }
    mat_exp(&(a * x.ln()))
}

/// Principal logarithm of `-T`.
pub fn mat_log_neg(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(t)?;
    check_invertible(t)?;
    let neg = -t;
    SchurParlett::new(&neg)?.apply(&Log).map_err(|e| match e {
        Error::MatFunDomain { eigenvalue } => Error::Domain(format!(
            "-T has eigenvalue {eigenvalue} on the closed negative real axis"
        )),
        other => other,
    })
}

/// `h(A)` for a scalar function analytic near the spectrum of `A`.
pub fn mat_fun(a: &DMatrix<f64>, h: &dyn ScalarFunction) -> Result<DMatrix<f64>> {
    SchurParlett::new(a)?.apply(h)
}

/// Like [`mat_fun`] with explicit tolerances.
pub fn mat_fun_with(a: &DMatrix<f64>, h: &dyn ScalarFunction, cfg: MatFunConfig) -> Result<DMatrix<f64>> {
    SchurParlett::with_config(a, cfg)?.apply(h)
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    check_square_finite(a)?;
    Ok(SchurParlett::new(a)?.eigenvalues())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}
