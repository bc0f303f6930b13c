//! Time-inhomogeneous phase-type laws.
//!
//! `IPH(π, T, λ)` is the absorption time of a Markov jump process whose
//! sub-intensity matrix at time `t` is `λ(t) T`. It has the same law as
//! `g(X)` with `X ~ PH(π, T)` and `g = Λ^{-1}`, `Λ(x) = ∫_0^x λ(t) dt`.

mod product;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{domain, invalid, Error, Result};
use crate::matfun::{mat_exp, mat_fun, ScalarFunction};
use crate::par::Parallelism;
use crate::phcore::PHDist;
use crate::quad::{integrate, QuadConfig};
use crate::roots::solve_increasing;

pub use product::{iph_general_sf, product_integral, MatrixRatePath, OdeConfig};

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A positive rate `λ(t)` with its primitive `Λ` and optionally `Λ^{-1}`.
///
/// Closures must be pure. Missing primitives are computed by adaptive
/// quadrature and missing inverses by bracketed root finding.
#[derive(Clone)]
pub struct RateFunction {
    eval: ScalarMap,
    primitive: Option<ScalarMap>,
    inverse: Option<ScalarMap>,
    name: String,
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction")
            .field("name", &self.name)
            .field("closed_primitive", &self.primitive.is_some())
            .field("closed_inverse", &self.inverse.is_some())
            .finish()
    }
}

/// Relative tolerance for numeric inversion of `Λ`.
const INVERSE_REL_TOL: f64 = 1e-13;

impl RateFunction {
    /// A rate given only by its values.
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            primitive: None,
            inverse: None,
            name: name.into(),
        }
    }

    pub fn with_primitive(mut self, primitive: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.primitive = Some(Arc::new(primitive));
        self
    }

    pub fn with_inverse(mut self, inverse: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    /// `λ ≡ c`
    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), move |_| c)
            .with_primitive(move |x| c * x)
            .with_inverse(move |y| y / c)
    }

    /// `λ(t) = 1 / (1 + t)`, so that `g(x) = e^x - 1`.
    pub fn pareto() -> Self {
        Self::new("pareto", |t: f64| 1.0 / (1.0 + t))
            .with_primitive(|x: f64| x.ln_1p())
            .with_inverse(|y: f64| y.exp_m1())
    }

    /// `λ(t) = β t^{β-1}`, so that `g(x) = x^{1/β}`.
    pub fn weibull(beta: f64) -> Self {
        Self::new(format!("weibull({beta})"), move |t: f64| beta * t.powf(beta - 1.0))
            .with_primitive(move |x: f64| x.powf(beta))
            .with_inverse(move |y: f64| y.powf(1.0 / beta))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_closed_primitive(&self) -> bool {
        self.primitive.is_some()
    }

    /// Drops the closed forms, forcing the numeric fallbacks.
    pub fn numeric_only(&self) -> Self {
        Self {
            eval: self.eval.clone(),
            primitive: None,
            inverse: None,
            name: format!("{} (numeric)", self.name),
        }
    }

    /// `λ(t)`
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// `Λ(x) = ∫_0^x λ(t) dt`
    pub fn primitive(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        match &self.primitive {
            Some(p) => Ok(p(x)),
            None => {
                let cfg = QuadConfig {
                    abs_tol: 1e-300,
                    rel_tol: 1e-13,
                    max_intervals: 4000,
                };
                Ok(integrate(|t: f64| self.eval(t), 0.0, x, &cfg)?.value)
            }
        }
    }

    /// `g(y) = Λ^{-1}(y)`
    pub fn inverse_primitive(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return domain(format!("Λ^{{-1}} needs y >= 0, got {y}"));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        match &self.inverse {
            Some(g) => Ok(g(y)),
            None => {
                let l0 = self.eval(0.0);
                let hint = if (1e-8..1e8).contains(&l0) { y / l0 } else { 1.0 };
                solve_increasing(
                    |x| self.primitive(x).unwrap_or(f64::NAN),
                    y,
                    0.0,
                    hint,
                    INVERSE_REL_TOL,
                )
            }
        }
    }

    /// `u ↦ λ(s + u)`
    pub fn shifted(&self, s: f64) -> Result<Self> {
        if s == 0.0 {
            return Ok(self.clone());
        }
        let base = self.clone();
        let offset = self.primitive(s)?;
        let eval = {
            let b = base.clone();
            move |u: f64| b.eval(s + u)
        };
        let mut out = Self::new(format!("{} shifted by {s}", self.name), eval);
        if self.primitive.is_some() {
            let b = base.clone();
            out = out.with_primitive(move |u: f64| b.primitive(s + u).unwrap_or(f64::NAN) - offset);
        }
        if self.primitive.is_some() && self.inverse.is_some() {
            let b = base;
            out = out.with_inverse(move |y: f64| b.inverse_primitive(y + offset).unwrap_or(f64::NAN) - s);
        }
        Ok(out)
    }

    /// Checks `λ > 0` on a 256-point log-spaced grid over `[1e-6, 1e4]`,
    /// `λ(0) >= 0`, and `Λ(Λ^{-1}(y)) = y` when both closed forms are
    /// present. `λ(0) = 0` is allowed so that `x^{1/β}` with `β > 1` passes.
    pub fn validate(&self) -> Result<()> {
        let at_zero = self.eval(0.0);
        if !(at_zero >= 0.0) {
            return Err(Error::Validation {
                constraint: format!("rate {} is negative at t = 0 (value {at_zero})", self.name),
            });
        }
        for t in (0..256).map(|k| 10f64.powf(-6.0 + 10.0 * k as f64 / 255.0)) {
            let v = self.eval(t);
            if !(v > 0.0) {
                return Err(Error::Validation {
                    constraint: format!("rate {} is not positive at t = {t} (value {v})", self.name),
                });
            }
        }
        if let (Some(p), Some(g)) = (&self.primitive, &self.inverse) {
            for k in 0..64 {
                let y = 10f64.powf(-4.0 + 7.0 * k as f64 / 63.0);
                let x = g(y);
                if !x.is_finite() {
                    continue;
                }
                let back = p(x);
                if (back - y).abs() > 1e-9 * y.max(1.0) {
                    return Err(Error::Validation {
                        constraint: format!("Λ(Λ^{{-1}}({y})) = {back} for rate {}", self.name),
                    });
                }
            }
        }
        Ok(())
    }
}

/// `IPH(π, T, λ)`
#[derive(Debug, Clone)]
pub struct IPHDist {
    base: PHDist,
    rate: RateFunction,
}

impl IPHDist {
    pub fn new(base: PHDist, rate: RateFunction) -> Result<Self> {
        rate.validate()?;
        Ok(Self { base, rate })
    }

    pub fn base(&self) -> &PHDist {
        &self.base
    }

    pub fn rate(&self) -> &RateFunction {
        &self.rate
    }

    fn state_vector(&self, x: f64) -> Result<nalgebra::RowDVector<f64>> {
        if !(x >= 0.0) || x.is_infinite() {
            return domain(format!("argument must be a finite nonnegative real, got {x}"));
        }
        let big = self.rate.primitive(x)?;
        Ok(self.base.pi() * mat_exp(&(self.base.t() * big))?)
    }

    /// `λ(x) π e^{Λ(x) T} t`
    pub fn pdf(&self, x: f64) -> Result<f64> {
        let v = self.state_vector(x)?;
        Ok((self.rate.eval(x) * (v * self.base.exit())[(0, 0)]).max(0.0))
    }

    /// `π e^{Λ(x) T} e`
    pub fn sf(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) || x.is_infinite() {
            return domain(format!("argument must be a finite nonnegative real, got {x}"));
        }
        self.base.sf(self.rate.primitive(x)?)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.sf(x)?)
    }

    /// Law of `τ - s` given `τ > s`.
    pub fn overshoot(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0) || s.is_infinite() {
            return domain(format!("overshoot level must be a finite nonnegative real, got {s}"));
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        let v = self.state_vector(s)?;
        let base = self.base.conditioned(v)?;
        Ok(Self {
            base,
            rate: self.rate.shifted(s)?,
        })
    }

    /// `p`-quantile, `g(F_X^{-1}(p))`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.rate.inverse_primitive(self.base.quantile(p)?)
    }

    /// Draws `g(X)` for `X ~ PH(π, T)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        self.base
            .sample(rng, count)?
            .into_iter()
            .map(|x| self.rate.inverse_primitive(x))
            .collect()
    }

    pub fn sample_seeded(&self, seed: u64, count: usize, mode: Parallelism) -> Result<Vec<f64>> {
        self.base
            .sample_seeded(seed, count, mode)?
            .into_iter()
            .map(|x| self.rate.inverse_primitive(x))
            .collect()
    }

    /// `E τ^α = π L(-T) t`, where `L` is the Laplace transform of `g^α`.
    pub fn alpha_moment(&self, alpha: f64, laplace: &dyn ScalarFunction) -> Result<f64> {
        if !(alpha > 0.0) {
            return invalid(format!("moment order must be positive, got {alpha}"));
        }
        let neg: DMatrix<f64> = -self.base.t();
        let l = mat_fun(&neg, laplace)?;
        Ok((self.base.pi() * l * self.base.exit())[(0, 0)])
    }
}
