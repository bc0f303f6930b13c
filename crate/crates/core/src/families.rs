//! Transformed phase-type families `Y = g(X + shift)`, `X ~ PH(π, T)`.
//!
//! | transform      | `g(x)`                       | tail          |
//! |----------------|------------------------------|---------------|
//! | `ParetoExp`    | `β (e^x - 1) / μ`            | matrix-Pareto |
//! | `Power`        | `x^{1/β}`                    | Weibull type  |
//! | `NegLogAffine` | `μ - σ log x`                | Gumbel type   |
//! | `ShiftedPower` | `μ + σ (x^{-ξ} - 1) / ξ`     | GEV type      |
//!
//! `μ` in `ParetoExp` is the scale reference stored on [`TransformedPH`]; it
//! is the mean of the base law unless the object was produced by
//! conditioning, which keeps the original reference. The first two
//! transforms are increasing, the last two decreasing; every survival
//! function returned here is `P(Y > y)`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{domain, invalid, Error, Result};
use crate::iph::RateFunction;
use crate::matfun::{mat_fun, mat_log_neg, mat_power_base, spectral_abscissa, Power, ScaledUpperGamma};
use crate::par::Parallelism;
use crate::phcore::{mixture_rep, MixtureSpec, PHDist, EULER_GAMMA};
use crate::quad::{integrate_to_infinity, QuadConfig};

/// The monotone map applied to a phase-type variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    ParetoExp { beta: f64 },
    Power { beta: f64 },
    NegLogAffine { mu: f64, sigma: f64 },
    ShiftedPower { mu: f64, sigma: f64, xi: f64 },
}

impl Transform {
    /// Short name used by the command line and parameter files.
    pub fn name(&self) -> &'static str {
        match self {
            Transform::ParetoExp { .. } => "pareto",
            Transform::Power { .. } => "weibull",
            Transform::NegLogAffine { .. } => "gumbel",
            Transform::ShiftedPower { .. } => "gev",
        }
    }

    pub fn is_increasing(&self) -> bool {
        matches!(self, Transform::ParetoExp { .. } | Transform::Power { .. })
    }

    /// Checks the parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Transform::ParetoExp { beta } | Transform::Power { beta } if !ok(beta) => {
                invalid(format!("β must be positive and finite, got {beta}"))
            }
            Transform::NegLogAffine { mu, sigma } | Transform::ShiftedPower { mu, sigma, .. }
                if !ok(sigma) || !mu.is_finite() =>
            {
                invalid(format!("need finite μ and σ > 0, got μ = {mu}, σ = {sigma}"))
            }
            Transform::ShiftedPower { xi, .. } if xi == 0.0 || !xi.is_finite() => {
                invalid(format!("ξ must be finite and nonzero, got {xi}"))
            }
            _ => Ok(()),
        }
    }

    /// `g(x)`; `mu_ref` is the matrix-Pareto scale reference.
    pub fn g(&self, x: f64, mu_ref: f64) -> f64 {
        match *self {
            Transform::ParetoExp { beta } => beta / mu_ref * x.exp_m1(),
            Transform::Power { beta } => x.powf(1.0 / beta),
            Transform::NegLogAffine { mu, sigma } => mu - sigma * x.ln(),
            Transform::ShiftedPower { mu, sigma, xi } => mu + sigma * (-xi * x.ln()).exp_m1() / xi,
        }
    }

    /// Generalised inverse on `[0, ∞]`: values of `y` left of the support of
    /// an increasing `g` map to `-∞`, values beyond the far end of a
    /// decreasing `g` map to `+∞` or `0` as appropriate.
    pub fn g_inv(&self, y: f64, mu_ref: f64) -> f64 {
        match *self {
            Transform::ParetoExp { beta } => {
                let a = mu_ref * y / beta;
                if a <= -1.0 {
                    f64::NEG_INFINITY
                } else {
                    a.ln_1p()
                }
            }
            Transform::Power { beta } => {
                if y < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    y.powf(beta)
                }
            }
            Transform::NegLogAffine { mu, sigma } => (-(y - mu) / sigma).exp(),
            Transform::ShiftedPower { mu, sigma, xi } => {
                let a = xi * (y - mu) / sigma;
                if a <= -1.0 {
                    if xi > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    (-a.ln_1p() / xi).exp()
                }
            }
        }
    }

    /// `|d g^{-1}(y) / dy|` inside the support.
    pub fn g_inv_jacobian(&self, y: f64, mu_ref: f64) -> f64 {
        match *self {
            Transform::ParetoExp { beta } => (mu_ref / beta) / (1.0 + mu_ref * y / beta),
            Transform::Power { beta } => beta * y.powf(beta - 1.0),
            Transform::NegLogAffine { mu, sigma } => (-(y - mu) / sigma).exp() / sigma,
            Transform::ShiftedPower { mu, sigma, xi } => {
                let z = self.g_inv(y, mu_ref);
                let _ = mu;
                z.powf(1.0 + xi) / sigma
            }
        }
    }

    /// Two transforms define the same map (for matrix-Pareto, the same
    /// ratio `β / μ`).
    fn same_map(&self, mu_a: f64, other: &Transform, mu_b: f64) -> bool {
        match (*self, *other) {
            (Transform::ParetoExp { beta: a }, Transform::ParetoExp { beta: b }) => {
                ((a / mu_a) - (b / mu_b)).abs() <= 1e-12 * (a / mu_a).abs()
            }
            (x, y) => x == y,
        }
    }
}

/// A moment that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

/// Result of a truncated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub converged: bool,
}

/// Truncation control for [`TransformedPH::mw_mgf`].
#[derive(Debug, Clone, Copy)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            max_terms: 2000,
        }
    }
}

/// `Y = g(X + shift)` with `X ~ PH(π, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPH {
    base: PHDist,
    transform: Transform,
    mu: f64,
    shift: f64,
}

impl TransformedPH {
    pub fn new(base: PHDist, transform: Transform) -> Result<Self> {
        Self::with_shift(base, transform, 0.0)
    }

    /// Matrix-Pareto with `β = μ`, i.e. `Y = e^X - 1`.
    pub fn log_ph(base: PHDist) -> Result<Self> {
        let mu = base.mean();
        Self::new(base, Transform::ParetoExp { beta: mu })
    }

    pub fn with_shift(base: PHDist, transform: Transform, shift: f64) -> Result<Self> {
        let mu = base.mean();
        Self::from_parts(base, transform, mu, shift)
    }

    /// All fields explicit; `mu` is the matrix-Pareto scale reference.
    pub fn from_parts(base: PHDist, transform: Transform, mu: f64, shift: f64) -> Result<Self> {
        transform.validate()?;
        if !(mu > 0.0 && mu.is_finite()) {
            return invalid(format!("scale reference μ must be positive, got {mu}"));
        }
        if !(shift >= 0.0 && shift.is_finite()) {
            return invalid(format!("shift must be finite and nonnegative, got {shift}"));
        }
        Ok(Self {
            base,
            transform,
            mu,
            shift,
        })
    }

    pub fn base(&self) -> &PHDist {
        &self.base
    }
    pub fn transform(&self) -> Transform {
        self.transform
    }
    /// Scale reference used by `ParetoExp`.
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `g^{-1}(y) - shift`, the base-scale value.
    pub fn to_base(&self, y: f64) -> f64 {
        self.transform.g_inv(y, self.mu) - self.shift
    }

    /// `g(x + shift)`
    pub fn from_base(&self, x: f64) -> f64 {
        self.transform.g(x + self.shift, self.mu)
    }

    /// `P(Y > y)`
    pub fn sf(&self, y: f64) -> Result<f64> {
        let u = self.to_base(y);
        if u.is_nan() {
            return domain(format!("argument {y} is not a number"));
        }
        let inc = self.transform.is_increasing();
        Ok(if u <= 0.0 {
            if inc { 1.0 } else { 0.0 }
        } else if u.is_infinite() {
            if inc { 0.0 } else { 1.0 }
        } else if inc {
            self.base.sf(u)?
        } else {
            self.base.cdf(u)?
        })
    }

    /// `P(Y <= y)`
    pub fn cdf(&self, y: f64) -> Result<f64> {
        let u = self.to_base(y);
        if u.is_nan() {
            return domain(format!("argument {y} is not a number"));
        }
        let inc = self.transform.is_increasing();
        Ok(if u <= 0.0 {
            if inc { 0.0 } else { 1.0 }
        } else if u.is_infinite() {
            if inc { 1.0 } else { 0.0 }
        } else if inc {
            self.base.cdf(u)?
        } else {
            self.base.sf(u)?
        })
    }

    /// `f_X(g^{-1}(y) - shift) |d g^{-1}/dy|`; zero outside the closed
    /// support.
    pub fn pdf(&self, y: f64) -> Result<f64> {
        let u = self.to_base(y);
        if u.is_nan() {
            return domain(format!("argument {y} is not a number"));
        }
        if u < 0.0 || u.is_infinite() {
            return Ok(0.0);
        }
        Ok(self.base.pdf(u)? * self.transform.g_inv_jacobian(y, self.mu))
    }

    /// `log f_Y(y)`
    pub fn log_pdf(&self, y: f64) -> Result<f64> {
        Ok(self.pdf(y)?.ln())
    }

    /// Smallest `y` with `P(Y <= y) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.transform.is_increasing() {
            Ok(self.from_base(self.base.quantile(p)?))
        } else {
            if !(p > 0.0 && p < 1.0) {
                return domain(format!("quantile level must lie in (0, 1), got {p}"));
            }
            Ok(self.from_base(self.base.quantile(1.0 - p)?))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        Ok(self.base.sample(rng, count)?.into_iter().map(|x| self.from_base(x)).collect())
    }

    pub fn sample_seeded(&self, seed: u64, count: usize, mode: Parallelism) -> Result<Vec<f64>> {
        Ok(self
            .base
            .sample_seeded(seed, count, mode)?
            .into_iter()
            .map(|x| self.from_base(x))
            .collect())
    }

    /// The rate `λ = (g^{-1})'` of the equivalent `IPH(π, T, λ)`, for
    /// increasing transforms without shift.
    pub fn rate_function(&self) -> Result<RateFunction> {
        if self.shift != 0.0 {
            return Err(Error::Unsupported("rate function of a shifted transform".into()));
        }
        let (tr, mu) = (self.transform, self.mu);
        match tr {
            Transform::ParetoExp { .. } | Transform::Power { .. } => Ok(RateFunction::new(tr.name(), move |t| {
                tr.g_inv_jacobian(t, mu)
            })
            .with_primitive(move |x| tr.g_inv(x, mu))
            .with_inverse(move |y| tr.g(y, mu))),
            _ => Err(Error::Unsupported(format!(
                "{} is decreasing and has no rate representation",
                tr.name()
            ))),
        }
    }

    fn require_pareto(&self, what: &str) -> Result<f64> {
        match self.transform {
            Transform::ParetoExp { beta } if self.shift == 0.0 => Ok(beta),
            Transform::ParetoExp { .. } => Err(Error::Unsupported(format!("{what} with a nonzero shift"))),
            _ => invalid(format!("{what} needs a matrix-Pareto law, got {}", self.transform.name())),
        }
    }

    /// Law of `Y - x` given `Y > x`: matrix-Pareto with `β' = β + μx` and
    /// initial vector proportional to `π (1 + μx/β)^T`.
    pub fn mp_conditional_excess(&self, x: f64) -> Result<Self> {
        let beta = self.require_pareto("conditional excess")?;
        if !(x >= 0.0 && x.is_finite()) {
            return domain(format!("threshold must be finite and nonnegative, got {x}"));
        }
        if x == 0.0 {
            return Ok(self.clone());
        }
        let m = mat_power_base(1.0 + self.mu * x / beta, self.base.t())?;
        let v = self.base.pi() * m;
        let base = self.base.conditioned(v)?;
        Self::from_parts(
            base,
            Transform::ParetoExp {
                beta: beta + self.mu * x,
            },
            self.mu,
            0.0,
        )
    }

    /// Laplace transform `E e^{-sY}` of a matrix-Pareto law.
    pub fn mp_laplace(&self, s: f64) -> Result<f64> {
        let beta = self.require_pareto("Laplace transform")?;
        if !(s > 0.0 && s.is_finite()) {
            return domain(format!("Laplace argument must be positive, got {s}"));
        }
        let h = ScaledUpperGamma::new(s * beta / self.mu)?;
        let m = mat_fun(self.base.t(), &h)?;
        let v = (self.base.pi() * m * self.base.exit())[(0, 0)];
        Ok(if v.abs() < 1e-300 { 0.0 } else { v })
    }

    /// `E (μY/β + 1)^α = π (-αI - T)^{-1} t`, finite iff every eigenvalue
    /// of `T` has real part below `-α`.
    pub fn mp_shifted_frac_moment(&self, alpha: f64) -> Result<f64> {
        self.require_pareto("shifted fractional moment")?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return domain(format!("α must be positive, got {alpha}"));
        }
        let t = self.base.t();
        let abscissa = spectral_abscissa(t)?;
        if abscissa >= -alpha {
            return Err(Error::Divergent(format!(
                "E (μY/β + 1)^{alpha} is infinite: spectral abscissa {abscissa} is not below {}",
                -alpha
            )));
        }
        let n = t.nrows();
        let m = DMatrix::<f64>::identity(n, n) * -alpha - t;
        let x = m
            .lu()
            .solve(self.base.exit())
            .ok_or_else(|| Error::Singular("-αI - T".into()))?;
        Ok((self.base.pi() * x)[(0, 0)])
    }

    fn require(&self, what: &str, tag: &str) -> Result<()> {
        if self.transform.name() != tag {
            return invalid(format!("{what} needs a {tag} law, got {}", self.transform.name()));
        }
        if self.shift != 0.0 {
            return Err(Error::Unsupported(format!("{what} with a nonzero shift")));
        }
        Ok(())
    }

    /// `E Y^θ = Γ(1 + θ/β) π (-T)^{-θ/β} e` for the power transform.
    pub fn mw_moment(&self, theta: f64) -> Result<f64> {
        self.require("matrix-Weibull moment", "weibull")?;
        let Transform::Power { beta } = self.transform else { unreachable!() };
        if !(theta > 0.0 && theta.is_finite()) {
            return domain(format!("θ must be positive, got {theta}"));
        }
        self.base.frac_moment(theta / beta)
    }

    /// `E e^{θY} = Σ_n θ^n/n! Γ(1 + n/β) π (-T)^{-n/β} e`, valid for `β > 1`.
    pub fn mw_mgf(&self, theta: f64, cfg: SeriesConfig) -> Result<SeriesValue> {
        self.require("matrix-Weibull moment generating function", "weibull")?;
        let Transform::Power { beta } = self.transform else { unreachable!() };
        if !(beta > 1.0) {
            return domain(format!("the series needs β > 1, got {beta}"));
        }
        if theta == 0.0 {
            return Ok(SeriesValue {
                value: 1.0,
                terms: 1,
                converged: true,
            });
        }
        let p = mat_fun(&-self.base.t(), &Power(-1.0 / beta))?;
        let pi = self.base.pi();
        // v_n = P^n e, kept normalised with its log scale in `log_scale`.
        let mut v = nalgebra::DVector::from_element(self.base.dim(), 1.0);
        let mut log_scale = 0.0;
        let mut sum = 0.0;
        let mut last = f64::INFINITY;
        let mut small = 0;
        for n in 0..cfg.max_terms {
            if n > 0 {
                v = &p * v;
                let s = v.amax();
                if s == 0.0 {
                    return Ok(SeriesValue {
                        value: sum,
                        terms: n,
                        converged: true,
                    });
                }
                v /= s;
                log_scale += s.ln();
            }
            let nf = n as f64;
            let w = (pi * &v)[(0, 0)];
            let log_mag = nf * theta.abs().ln() - statrs::function::gamma::ln_gamma(nf + 1.0)
                + statrs::function::gamma::ln_gamma(1.0 + nf / beta)
                + log_scale
                + w.abs().ln();
            let sign = if theta < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 } * w.signum();
            let term = sign * log_mag.exp();
            sum += term;
            last = term.abs();
            if n > 0 && last <= cfg.rel_tol * sum.abs() {
                small += 1;
                if small >= 2 {
                    return Ok(SeriesValue {
                        value: sum,
                        terms: n + 1,
                        converged: true,
                    });
                }
            } else {
                small = 0;
            }
        }
        Err(Error::NonConvergence {
            terms: cfg.max_terms,
            last_term: last,
        })
    }

    /// `E Y = μ + σγ + σ π log(-T) e` for the negative-log transform.
    pub fn ep_mean(&self) -> Result<f64> {
        self.require("exponential-PH mean", "gumbel")?;
        let Transform::NegLogAffine { mu, sigma } = self.transform else { unreachable!() };
        let l = mat_log_neg(self.base.t())?;
        let mass = self.base.total_mass();
        let tail = -self.base.t().clone();
        let tail = tail.lu().solve(self.base.exit()).ok_or_else(|| Error::Singular("-T".into()))?;
        let plog = (self.base.pi() * l * tail)[(0, 0)];
        Ok(mu + sigma * EULER_GAMMA * mass + sigma * plog)
    }

    /// `E e^{-sY} = e^{-μs} Γ(1 + sσ) π (-T)^{-sσ} e`, for `sσ > -1`.
    pub fn ep_laplace(&self, s: f64) -> Result<f64> {
        self.require("exponential-PH Laplace transform", "gumbel")?;
        let Transform::NegLogAffine { mu, sigma } = self.transform else { unreachable!() };
        if !(s * sigma > -1.0) {
            return domain(format!("need sσ > -1, got sσ = {}", s * sigma));
        }
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok((-mu * s).exp() * self.base.frac_moment(s * sigma)?)
    }

    /// `E Y = μ + (σ/ξ)(Γ(1 - ξ) π (-T)^{ξ} e - 1)`, finite for `ξ < 1`.
    pub fn sp_mean(&self) -> Result<f64> {
        self.require("shifted-power mean", "gev")?;
        let Transform::ShiftedPower { mu, sigma, xi } = self.transform else { unreachable!() };
        if xi >= 1.0 {
            return Err(Error::Divergent(format!("the mean is infinite for ξ = {xi} >= 1")));
        }
        Ok(mu + sigma / xi * (self.base.frac_moment(-xi)? - 1.0))
    }

    /// `E Y`, closed form where available and quadrature otherwise.
    pub fn mean(&self) -> Result<Moment> {
        if self.shift == 0.0 {
            return match self.transform {
                Transform::ParetoExp { beta } => {
                    match TransformedPH::mp_shifted_frac_moment(self, 1.0) {
                        Ok(m) => Ok(Moment::Finite(beta / self.mu * (m - 1.0))),
                        Err(Error::Divergent(_)) => Ok(Moment::Infinite),
                        Err(e) => Err(e),
                    }
                }
                Transform::Power { .. } => self.mw_moment(1.0).map(Moment::Finite),
                Transform::NegLogAffine { .. } => self.ep_mean().map(Moment::Finite),
                Transform::ShiftedPower { .. } => match self.sp_mean() {
                    Ok(m) => Ok(Moment::Finite(m)),
                    Err(Error::Divergent(_)) => Ok(Moment::Infinite),
                    Err(e) => Err(e),
                },
            };
        }
        match self.transform {
            Transform::ParetoExp { beta } => {
                let abscissa = spectral_abscissa(self.base.t())?;
                if abscissa >= -1.0 {
                    return Ok(Moment::Infinite);
                }
                let unshifted = Self::from_parts(self.base.clone(), self.transform, self.mu, 0.0)?;
                let m = unshifted.mp_shifted_frac_moment(1.0)?;
                Ok(Moment::Finite(beta / self.mu * (self.shift.exp() * m - 1.0)))
            }
            Transform::ShiftedPower { xi, .. } if xi >= 1.0 => Ok(Moment::Infinite),
            _ => {
                let cfg = QuadConfig {
                    abs_tol: 1e-300,
                    rel_tol: 1e-10,
                    max_intervals: 4000,
                };
                let q = integrate_to_infinity(
                    |x: f64| {
                        if x <= 0.0 {
                            return 0.0;
                        }
                        self.base.pdf(x).map(|f| f * self.from_base(x)).unwrap_or(0.0)
                    },
                    0.0,
                    &cfg,
                )?;
                Ok(Moment::Finite(q.value))
            }
        }
    }
}

/// `Σ α_i f_i(y)` for components sharing one transform.
pub fn mixture_density(weights: &[f64], components: &[TransformedPH], y: f64) -> Result<f64> {
    check_mixture(weights, components)?;
    let mut sum = 0.0;
    for (w, c) in weights.iter().zip(components) {
        sum += w * c.pdf(y)?;
    }
    Ok(sum)
}

/// The mixture as a single transformed law over the block-diagonal base.
pub fn mixture_transformed(weights: &[f64], components: &[TransformedPH]) -> Result<TransformedPH> {
    check_mixture(weights, components)?;
    let base = mixture_rep(&MixtureSpec {
        weights: weights.to_vec(),
        components: components.iter().map(|c| c.base.clone()).collect(),
    })?;
    let first = &components[0];
    let mu = base.mean();
    let transform = match first.transform {
        Transform::ParetoExp { beta } => Transform::ParetoExp {
            beta: beta / first.mu * mu,
        },
        t => t,
    };
    TransformedPH::from_parts(base, transform, mu, first.shift)
}

fn check_mixture(weights: &[f64], components: &[TransformedPH]) -> Result<()> {
    if weights.len() != components.len() || weights.is_empty() {
        return invalid(format!("{} weights for {} components", weights.len(), components.len()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return invalid("mixture weights must be a probability vector");
    }
    let first = &components[0];
    for c in &components[1..] {
        if !first.transform.same_map(first.mu, &c.transform, c.mu) || c.shift != first.shift {
            return invalid("mixture components must share one transform");
        }
    }
    Ok(())
}

/// Family tags and parameters for [`erlang_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErlangFamily {
    /// Matrix-Pareto with `β = μ`.
    Pareto,
    Weibull { beta: f64 },
    Gumbel { mu: f64, sigma: f64 },
    Gev { mu: f64, sigma: f64, xi: f64 },
}

/// Closed-form density of `g(X)` for `X ~ Er_n(λ)`.
pub fn erlang_oracle(family: ErlangFamily, n: usize, lambda: f64, y: f64) -> Result<f64> {
    if n == 0 || !(lambda > 0.0) {
        return domain(format!("need n >= 1 and λ > 0, got n = {n}, λ = {lambda}"));
    }
    let nf = n as f64;
    let log_c = nf * lambda.ln() - statrs::function::factorial::ln_factorial(n as u64 - 1);
    let v = match family {
        ErlangFamily::Pareto => {
            if y <= 0.0 {
                return Ok(if y == 0.0 && n == 1 { lambda } else { 0.0 });
            }
            let l = y.ln_1p();
            (log_c - (lambda + 1.0) * l + (nf - 1.0) * l.ln()).exp()
        }
        ErlangFamily::Weibull { beta } => {
            if !(beta > 0.0) {
                return domain(format!("β must be positive, got {beta}"));
            }
            if y <= 0.0 {
                return Ok(0.0);
            }
            beta * (log_c + (nf * beta - 1.0) * y.ln() - lambda * y.powf(beta)).exp()
        }
        ErlangFamily::Gumbel { mu, sigma } => {
            if !(sigma > 0.0) {
                return domain(format!("σ must be positive, got {sigma}"));
            }
            let r = (y - mu) / sigma;
            (log_c - nf * r - lambda * (-r).exp()).exp() / sigma
        }
        ErlangFamily::Gev { mu, sigma, xi } => {
            if !(sigma > 0.0) || xi == 0.0 {
                return domain(format!("need σ > 0 and ξ ≠ 0, got σ = {sigma}, ξ = {xi}"));
            }
            let a = 1.0 + xi * (y - mu) / sigma;
            if a <= 0.0 {
                return Ok(0.0);
            }
            let ln_z = -a.ln() / xi;
            (log_c + (xi + nf) * ln_z - lambda * ln_z.exp()).exp() / sigma
        }
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phcore::{erlang_rep, ErlangSpec};

    fn er(n: usize, l: f64) -> PHDist {
        erlang_rep(ErlangSpec { n, lambda: l }).unwrap()
    }

    #[test]
    fn log_erlang_density_value() {
        let d = TransformedPH::log_ph(er(2, 3.0)).unwrap();
        let y = std::f64::consts::E - 1.0;
        assert!((d.pdf(y).unwrap() - 9.0 * (-4f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn gumbel_survival_at_zero() {
        let d = TransformedPH::new(PHDist::exponential(1.0).unwrap(), Transform::NegLogAffine { mu: 0.0, sigma: 1.0 })
            .unwrap();
        assert!((d.sf(0.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn support_clamping() {
        let gev = TransformedPH::new(
            PHDist::exponential(1.0).unwrap(),
            Transform::ShiftedPower { mu: 0.0, sigma: 1.0, xi: -0.5 },
        )
        .unwrap();
        // support is (-∞, 2)
        assert_eq!(gev.sf(2.5).unwrap(), 0.0);
        assert_eq!(gev.pdf(2.5).unwrap(), 0.0);
        let frechet = TransformedPH::new(
            PHDist::exponential(1.0).unwrap(),
            Transform::ShiftedPower { mu: 0.0, sigma: 1.0, xi: 0.5 },
        )
        .unwrap();
        // support is (-2, ∞)
        assert_eq!(frechet.sf(-3.0).unwrap(), 1.0);
        let par = TransformedPH::log_ph(er(2, 1.0)).unwrap();
        assert_eq!(par.sf(-0.5).unwrap(), 1.0);
        assert_eq!(par.pdf(-0.5).unwrap(), 0.0);
    }

    #[test]
    fn scalar_pareto_conditional_excess() {
        let d = TransformedPH::log_ph(PHDist::exponential(1.0).unwrap()).unwrap();
        let c = d.mp_conditional_excess(3.0).unwrap();
        assert_eq!(c.transform(), Transform::ParetoExp { beta: 4.0 });
        for y in [0.5, 2.0, 10.0] {
            assert!((c.sf(y).unwrap() - 1.0 / (1.0 + y / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn shifted_moment_boundary() {
        let d = TransformedPH::log_ph(PHDist::exponential(2.0).unwrap()).unwrap();
        assert!((d.mp_shifted_frac_moment(1.0).unwrap() - 2.0).abs() < 1e-14);
        let d = TransformedPH::log_ph(PHDist::exponential(1.0).unwrap()).unwrap();
        assert!(matches!(d.mp_shifted_frac_moment(1.0), Err(Error::Divergent(_))));
        assert_eq!(d.mean().unwrap(), Moment::Infinite);
    }

    #[test]
    fn weibull_rayleigh_mean() {
        let d = TransformedPH::new(PHDist::exponential(1.0).unwrap(), Transform::Power { beta: 2.0 }).unwrap();
        let want = std::f64::consts::PI.sqrt() / 2.0;
        assert!((d.mw_moment(1.0).unwrap() - want).abs() < 1e-13);
        assert!((d.mw_moment(2.0).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mgf_rejects_small_beta() {
        let d = TransformedPH::new(PHDist::exponential(1.0).unwrap(), Transform::Power { beta: 1.0 }).unwrap();
        assert!(matches!(d.mw_mgf(0.3, SeriesConfig::default()), Err(Error::Domain(_))));
        let d = TransformedPH::new(PHDist::exponential(1.0).unwrap(), Transform::Power { beta: 2.0 }).unwrap();
        assert_eq!(d.mw_mgf(0.0, SeriesConfig::default()).unwrap().value, 1.0);
    }

    #[test]
    fn gumbel_mean_and_laplace() {
        let d = TransformedPH::new(PHDist::exponential(1.0).unwrap(), Transform::NegLogAffine { mu: 0.3, sigma: 2.0 })
            .unwrap();
        assert!((d.ep_mean().unwrap() - (0.3 + 2.0 * EULER_GAMMA)).abs() < 1e-14);
        let s = 0.4;
        let want = (-0.3f64 * s).exp() * statrs::function::gamma::gamma(1.0 + 2.0 * s);
        assert!((d.ep_laplace(s).unwrap() - want).abs() < 1e-13);
        assert_eq!(d.ep_laplace(0.0).unwrap(), 1.0);
        assert!(d.ep_laplace(-0.6).is_err());
    }

    #[test]
    fn gev_mean_rejects_xi_one() {
        let d = TransformedPH::new(
            PHDist::exponential(1.0).unwrap(),
            Transform::ShiftedPower { mu: 0.0, sigma: 1.0, xi: 1.0 },
        )
        .unwrap();
        assert!(matches!(d.sp_mean(), Err(Error::Divergent(_))));
    }

    #[test]
    fn oracle_scalar_cases() {
        let y: f64 = 1.7;
        let p = erlang_oracle(ErlangFamily::Pareto, 1, 1.0, y).unwrap();
        assert!((p - (1.0 + y).powi(-2)).abs() < 1e-15);
        let w = erlang_oracle(ErlangFamily::Weibull { beta: 1.5 }, 1, 0.7, y).unwrap();
        let want = 0.7 * 1.5 * y.powf(0.5) * (-0.7 * y.powf(1.5)).exp();
        assert!((w - want).abs() < 1e-15);
    }

    #[test]
    fn mixture_requires_shared_transform() {
        let a = TransformedPH::log_ph(er(1, 1.0)).unwrap();
        let b = TransformedPH::new(er(2, 3.0), Transform::Power { beta: 2.0 }).unwrap();
        assert!(mixture_density(&[0.5, 0.5], &[a.clone(), b], 1.0).is_err());
        let c = TransformedPH::log_ph(er(2, 3.0)).unwrap();
        let y: f64 = 2.0;
        let f = mixture_density(&[0.4, 0.6], &[a, c], y).unwrap();
        let l = y.ln_1p();
        let want = 0.4 * (1.0 + y).powi(-2) + 0.6 * 9.0 * (1.0 + y).powi(-4) * l;
        assert!((f - want).abs() < 1e-14);
    }
}
