//! Upper incomplete gamma function of a matrix.
//!
//! With `t = s e^v`,
//!
//! ```text
//! Γ(z, s) = e^{-s} ∫_0^∞ exp(z (ln s + v)) exp(-s (e^v - 1)) dv
//! ```
//!
//! and every `z`-derivative is obtained by differentiating under the integral
//! sign. The same kernel without the `ln s` offset and the `e^{-s}` prefactor
//! is `e^s s^{-z} Γ(z, s)`, which stays O(1) for large `s` where `Γ` itself
//! underflows.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::parlett::{ScalarFunction, SchurParlett};
use crate::error::{domain, Result};
use crate::quad::{integrate, QuadConfig};

type C64 = Complex64;

/// Integrand family `(w^k / k!) e^{z w} e^{-s (e^v - 1)}` with `w = offset + v`.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    s: f64,
    offset: f64,
    prefactor: f64,
}

impl Kernel {
    fn log_magnitude(&self, z: C64, v: f64, k: usize, ln_kfact: f64) -> f64 {
        let w = self.offset + v;
        let mut lm = z.re * w - self.s * v.exp_m1();
        if k > 0 {
            lm += k as f64 * w.abs().ln() - ln_kfact;
        }
        lm
    }

    /// Upper integration limit beyond which every requested term is
    /// negligible relative to the largest integrand value seen.
    fn cutoff(&self, z: C64, order: usize) -> f64 {
        let ln_kfact = statrs::function::factorial::ln_factorial(order as u64);
        let mag = |v: f64| {
            self.log_magnitude(z, v, 0, 0.0)
                .max(self.log_magnitude(z, v, order, ln_kfact))
        };
        let mut peak = mag(0.0);
        let mut v = 0.0;
        let step = 0.125;
        while v < 2000.0 {
            v += step;
            let m = mag(v);
            peak = peak.max(m);
            if m < peak - 48.0 && self.s * v.exp_m1() > 1.0 {
                break;
            }
        }
        v
    }

    fn coefficients(&self, z: C64, order: usize) -> Result<Vec<C64>> {
        let upper = self.cutoff(z, order);
        let cfg = QuadConfig {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_intervals: 4000,
        };
        let f = |v: f64| {
            let w = self.offset + v;
            let base = (z * w).exp() * (-self.s * v.exp_m1()).exp();
            let mut out = Vec::with_capacity(order + 1);
            let mut p = base;
            out.push(p);
            for k in 1..=order {
                p = p * w / k as f64;
                out.push(p);
            }
            out
        };
        let q = integrate(f, 0.0, upper, &cfg)?;
        Ok(q.value.into_iter().map(|c| c * self.prefactor).collect())
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!("incomplete gamma needs s > 0, got {s}"));
    }
    Ok(())
}

/// `z ↦ Γ(z, s)` with its Taylor coefficients.
#[derive(Debug, Clone, Copy)]
pub struct UpperGamma {
    kernel: Kernel,
}

impl UpperGamma {
    pub fn new(s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(Self {
            kernel: Kernel {
                s,
                offset: s.ln(),
                prefactor: (-s).exp(),
            },
        })
    }
}

impl ScalarFunction for UpperGamma {
    fn eval(&self, z: C64) -> Option<C64> {
        self.kernel.coefficients(z, 0).ok().map(|c| c[0])
    }
    fn taylor(&self, z: C64, order: usize) -> Option<Vec<C64>> {
        Some(
            self.kernel
                .coefficients(z, order)
                .unwrap_or_else(|_| vec![C64::new(f64::NAN, 0.0); order + 1]),
        )
    }
}

/// `z ↦ e^s s^{-z} Γ(z, s) = ∫_0^∞ e^{z v} e^{-s (e^v - 1)} dv`.
///
/// For a PH variable `X`, `π h(T) t = E exp(-s (e^X - 1))`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledUpperGamma {
    kernel: Kernel,
}

impl ScaledUpperGamma {
    pub fn new(s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(Self {
            kernel: Kernel {
                s,
                offset: 0.0,
                prefactor: 1.0,
            },
        })
    }
}

impl ScalarFunction for ScaledUpperGamma {
    fn eval(&self, z: C64) -> Option<C64> {
        self.kernel.coefficients(z, 0).ok().map(|c| c[0])
    }
    fn taylor(&self, z: C64, order: usize) -> Option<Vec<C64>> {
        Some(
            self.kernel
                .coefficients(z, order)
                .unwrap_or_else(|_| vec![C64::new(f64::NAN, 0.0); order + 1]),
        )
    }
}

/// Scalar `Γ(a, s)` for real `a` (any sign) and `s > 0`.
pub fn upper_inc_gamma(a: f64, s: f64) -> Result<f64> {
    let g = UpperGamma::new(s)?;
    Ok(g.kernel.coefficients(C64::new(a, 0.0), 0)?[0].re)
}

/// `Γ(A, s)`, the upper incomplete gamma function applied to a matrix.
pub fn upper_inc_gamma_mat(a: &DMatrix<f64>, s: f64) -> Result<DMatrix<f64>> {
    let h = UpperGamma::new(s)?;
    SchurParlett::new(a)?.apply(&h)
}
