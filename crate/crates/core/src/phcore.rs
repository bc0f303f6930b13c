//! Classical phase-type distributions `PH(π, T)`.
//!
//! A [`PHDist`] is either a genuine Markov representation (π a probability
//! vector, `T` a sub-intensity matrix, exit rates `t = -T e`) or, with the
//! Markov flag off, a matrix-exponential representation whose only
//! requirement is that `x ↦ π e^{Tx} t` is a probability density.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, invalid, Error, Result};
use crate::matfun::{self, check_invertible, mat_exp, mat_fun, spectral_abscissa, Power, SubIntensityMatrix};
use crate::par::{map_collect, Parallelism};
use crate::roots::bisect_decreasing;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Draws per independently seeded RNG stream in [`PHDist::sample_seeded`].
pub const SAMPLE_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PHDist {
    pi: RowDVector<f64>,
    t: DMatrix<f64>,
    exit: DVector<f64>,
    /// `(-T)^{-1} t`; equals `e` for Markov representations.
    tail: DVector<f64>,
    markov: bool,
}

/// `Er_n(λ)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangSpec {
    pub n: usize,
    pub lambda: f64,
}

/// Finite mixture `Σ α_i PH_i`.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub components: Vec<PHDist>,
}

impl PHDist {
    /// Builds and validates a representation with exit vector `-T e`.
    pub fn new(pi: impl Into<Vec<f64>>, t: DMatrix<f64>, markov_flag: bool) -> Result<Self> {
        let pi = pi.into();
        if markov_flag {
            Self::markov(pi, t)
        } else {
            let exit = matfun::exit_vector(&t);
            Self::matrix_exponential(pi, t, exit.as_slice().to_vec())
        }
    }

    fn markov(pi: Vec<f64>, t: DMatrix<f64>) -> Result<Self> {
        if pi.len() != t.nrows() {
            return invalid(format!("π has length {} but T is {}x{}", pi.len(), t.nrows(), t.ncols()));
        }
        if let Some((i, v)) = pi.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Validation {
                constraint: format!("π[{i}] = {v} must be nonnegative"),
            });
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation {
                constraint: format!("π sums to {total}, expected 1"),
            });
        }
        let t = SubIntensityMatrix::new(t)?.into_inner();
        let exit = matfun::exit_vector(&t);
        let n = t.nrows();
        Ok(Self {
            pi: RowDVector::from_vec(pi),
            t,
            exit,
            tail: DVector::from_element(n, 1.0),
            markov: true,
        })
    }

    /// A matrix-exponential representation with an explicit exit vector.
    ///
    /// Validation is weak: `T` must be invertible with spectrum in the open
    /// left half plane, the density must be nonnegative on a grid and the
    /// total mass `π (-T)^{-1} t` must be 1 within `1e-6`.
    pub fn matrix_exponential(pi: impl Into<Vec<f64>>, t: DMatrix<f64>, exit: impl Into<Vec<f64>>) -> Result<Self> {
        let (pi, exit) = (pi.into(), exit.into());
        matfun::check_square_finite(&t)?;
        let n = t.nrows();
        if pi.len() != n || exit.len() != n {
            return invalid(format!(
                "dimension mismatch: π has {}, t has {}, T is {n}x{n}",
                pi.len(),
                exit.len()
            ));
        }
        if pi.iter().chain(&exit).any(|v| !v.is_finite()) {
            return invalid("π and t must be finite");
        }
        check_invertible(&t)?;
        let abscissa = spectral_abscissa(&t)?;
        if abscissa >= 0.0 {
            return Err(Error::Validation {
                constraint: format!("T has an eigenvalue with real part {abscissa} >= 0"),
            });
        }
        let exit = DVector::from_vec(exit);
        let tail = (-&t)
            .lu()
            .solve(&exit)
            .ok_or_else(|| Error::Singular("-T is not invertible".into()))?;
        let d = Self {
            pi: RowDVector::from_vec(pi),
            t,
            exit,
            tail,
            markov: false,
        };
        let mass = d.total_mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Validation {
                constraint: format!("density integrates to {mass}, expected 1"),
            });
        }
        let x_hi = 50.0 / abscissa.abs();
        let grid = 1000;
        let values: Vec<f64> = (0..=grid)
            .map(|k| d.pdf(x_hi * k as f64 / grid as f64))
            .collect::<Result<_>>()?;
        let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| **v < -1e-10 * peak.max(1.0)) {
            return Err(Error::Validation {
                constraint: format!("density is negative ({v:e}) at x = {}", x_hi * k as f64 / grid as f64),
            });
        }
        Ok(d)
    }

    /// `Exp(rate)`
    pub fn exponential(rate: f64) -> Result<Self> {
        erlang_rep(ErlangSpec { n: 1, lambda: rate })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }
    pub fn pi(&self) -> &RowDVector<f64> {
        &self.pi
    }
    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }
    pub fn exit(&self) -> &DVector<f64> {
        &self.exit
    }
    pub fn is_markov(&self) -> bool {
        self.markov
    }

    /// `π (-T)^{-1} t`; 1 for every valid representation.
    pub fn total_mass(&self) -> f64 {
        (&self.pi * &self.tail)[(0, 0)]
    }

    /// `π e^{Tx}`
    pub fn state_vector(&self, x: f64) -> Result<RowDVector<f64>> {
        check_x(x)?;
        Ok(&self.pi * mat_exp(&(&self.t * x))?)
    }

    /// `π e^{Tx} t`
    pub fn pdf(&self, x: f64) -> Result<f64> {
        let v = self.state_vector(x)?;
        Ok(self.clamp_density((v * &self.exit)[(0, 0)]))
    }

    /// `P(X > x) = π e^{Tx} e`
    pub fn sf(&self, x: f64) -> Result<f64> {
        let v = self.state_vector(x)?;
        Ok((v * &self.tail)[(0, 0)].clamp(0.0, 1.0))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.sf(x)?)
    }

    /// Density and survival function from one matrix exponential.
    pub fn pdf_sf(&self, x: f64) -> Result<(f64, f64)> {
        let v = self.state_vector(x)?;
        let f = (&v * &self.exit)[(0, 0)];
        let s = (&v * &self.tail)[(0, 0)];
        Ok((self.clamp_density(f), s.clamp(0.0, 1.0)))
    }

    fn clamp_density(&self, f: f64) -> f64 {
        // Markov densities are nonnegative by construction; ME ones only up
        // to round-off.
        f.max(0.0)
    }

    /// `E X = π (-T)^{-1} e`
    pub fn mean(&self) -> f64 {
        let neg = -&self.t;
        let x = neg.lu().solve(&self.tail).expect("validated invertible");
        (&self.pi * x)[(0, 0)]
    }

    /// `E X^θ = Γ(1+θ) π (-T)^{-θ} e` for `θ > -1`.
    pub fn frac_moment(&self, theta: f64) -> Result<f64> {
        if !(theta > -1.0) || !theta.is_finite() {
            return domain(format!("fractional moment needs θ > -1, got {theta}"));
        }
        if theta == 0.0 {
            return Ok(self.total_mass());
        }
        let p = mat_fun(&-&self.t, &Power(-theta))?;
        let v = (&self.pi * p * &self.tail)[(0, 0)];
        Ok(statrs::function::gamma::gamma(1.0 + theta) * v)
    }

    /// `E log X = -γ - π log(-T) e`
    pub fn log_moment(&self) -> Result<f64> {
        let l = matfun::mat_log_neg(&self.t)?;
        Ok(-EULER_GAMMA * self.total_mass() - (&self.pi * l * &self.tail)[(0, 0)])
    }

    /// Same `T` and exit vector, initial vector `v / (v (-T)^{-1} t)`.
    ///
    /// `v` is typically `π e^{Tx}`, which turns this into conditioning on
    /// survival past `x`.
    pub fn conditioned(&self, v: RowDVector<f64>) -> Result<Self> {
        if v.len() != self.dim() {
            return invalid(format!("vector of length {} for a {}-phase law", v.len(), self.dim()));
        }
        let mass = (&v * &self.tail)[(0, 0)];
        if !(mass >= 1e-300) {
            return Err(Error::DegenerateConditioning { probability: mass.max(0.0) });
        }
        let mut pi = v / mass;
        if self.markov {
            pi.iter_mut().for_each(|p| *p = p.max(0.0));
            let s = pi.sum();
            pi /= s;
        }
        Ok(Self {
            pi,
            t: self.t.clone(),
            exit: self.exit.clone(),
            tail: self.tail.clone(),
            markov: self.markov,
        })
    }

    /// Smallest `x` with `P(X <= x) >= p`, by bisection on the survival
    /// function.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return domain(format!("quantile level must lie in [0, 1), got {p}"));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let target = 1.0 - p;
        let sf = |x: f64| self.sf(x).unwrap_or(0.0);
        let mut hi = self.mean().max(1e-300);
        let mut guard = 0;
        while sf(hi) > target {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Domain(format!("could not bracket quantile {p}")));
            }
        }
        Ok(bisect_decreasing(sf, target, 0.0, hi))
    }

    /// `count` i.i.d. absorption times by jump-chain simulation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        let sim = JumpChain::new(self)?;
        Ok((0..count).map(|_| sim.draw(rng)).collect())
    }

    /// Reproducible sampling with one ChaCha8 stream per block of
    /// [`SAMPLE_BLOCK`] draws; the result is independent of `mode`.
    pub fn sample_seeded(&self, seed: u64, count: usize, mode: Parallelism) -> Result<Vec<f64>> {
        let sim = JumpChain::new(self)?;
        let blocks: Vec<usize> = (0..count.div_ceil(SAMPLE_BLOCK)).collect();
        let chunks = map_collect(&blocks, mode, |_, &b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let len = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
            (0..len).map(|_| sim.draw(&mut rng)).collect::<Vec<f64>>()
        });
        Ok(chunks.concat())
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || x.is_infinite() {
        return domain(format!("argument must be a finite nonnegative real, got {x}"));
    }
    Ok(())
}

/// Precomputed jump-chain tables.
struct JumpChain {
    initial: Vec<f64>,
    rates: Vec<f64>,
    /// Cumulative jump probabilities; index `p` is absorption.
    jumps: Vec<Vec<f64>>,
}

impl JumpChain {
    fn new(d: &PHDist) -> Result<Self> {
        if !d.markov {
            return Err(Error::Unsupported(
                "sampling requires a Markov (phase-type) representation".into(),
            ));
        }
        let p = d.dim();
        let initial = cumulative(d.pi.iter().copied());
        let rates: Vec<f64> = (0..p).map(|i| -d.t[(i, i)]).collect();
        let jumps = (0..p)
            .map(|i| {
                let probs = (0..=p).map(|j| {
                    if j == p {
                        d.exit[i] / rates[i]
                    } else if j == i {
                        0.0
                    } else {
                        d.t[(i, j)] / rates[i]
                    }
                });
                cumulative(probs)
            })
            .collect();
        Ok(Self { initial, rates, jumps })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.rates.len();
        let mut state = pick(&self.initial, rng.random::<f64>());
        let mut time = 0.0;
        while state < p {
            let u: f64 = rng.random();
            time += -(1.0 - u).ln() / self.rates[state];
            state = pick(&self.jumps[state], rng.random::<f64>());
        }
        time
    }
}

fn cumulative(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    // Normalise away round-off so the last bucket always catches u < 1.
    let total = acc;
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

fn pick(cum: &[f64], u: f64) -> usize {
    let idx = cum.partition_point(|&c| c <= u);
    // skip zero-probability buckets at the end produced by round-off
    idx.min(cum.len() - 1)
}

/// `PH(π, T)` constructor with the Markov flag spelled out.
pub fn ph_new(pi: impl Into<Vec<f64>>, t: DMatrix<f64>, markov_flag: bool) -> Result<PHDist> {
    PHDist::new(pi, t, markov_flag)
}

/// Erlang law: `π = (1, 0, ..., 0)`, bidiagonal `T` with `-λ` and `λ`.
pub fn erlang_rep(spec: ErlangSpec) -> Result<PHDist> {
    if spec.n == 0 {
        return invalid("Erlang needs at least one phase");
    }
    gen_erlang_rep(&vec![spec.lambda; spec.n])
}

/// Sum of independent exponentials with the given rates.
pub fn gen_erlang_rep(lambdas: &[f64]) -> Result<PHDist> {
    if lambdas.is_empty() {
        return invalid("generalized Erlang needs at least one rate");
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return invalid(format!("rates must be positive and finite, got {l}"));
    }
    let n = lambdas.len();
    let mut t = DMatrix::zeros(n, n);
    for (i, &l) in lambdas.iter().enumerate() {
        t[(i, i)] = -l;
        if i + 1 < n {
            t[(i, i + 1)] = l;
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    PHDist::new(pi, t, true)
}

/// Block-diagonal representation of a finite mixture.
pub fn mixture_rep(spec: &MixtureSpec) -> Result<PHDist> {
    let MixtureSpec { weights, components } = spec;
    if weights.len() != components.len() || weights.is_empty() {
        return invalid(format!(
            "{} weights for {} components",
            weights.len(),
            components.len()
        ));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Validation {
            constraint: format!("mixture weight {w} must be nonnegative"),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Validation {
            constraint: format!("mixture weights sum to {total}, expected 1"),
        });
    }
    if components.len() == 1 {
        return Ok(components[0].clone());
    }
    let n: usize = components.iter().map(PHDist::dim).sum();
    let mut t = DMatrix::zeros(n, n);
    let mut pi = Vec::with_capacity(n);
    let mut exit = Vec::with_capacity(n);
    let mut off = 0;
    for (w, c) in weights.iter().zip(components) {
        let p = c.dim();
        t.view_mut((off, off), (p, p)).copy_from(&c.t);
        pi.extend(c.pi.iter().map(|v| w * v));
        exit.extend(c.exit.iter().copied());
        off += p;
    }
    if components.iter().all(PHDist::is_markov) {
        // renormalise to absorb round-off in the weights
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= s);
        PHDist::new(pi, t, true)
    } else {
        PHDist::matrix_exponential(pi, t, exit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_and_erlang_basics() {
        let e = PHDist::exponential(3.0).unwrap();
        assert_eq!(e.dim(), 1);
        assert!((e.pdf(0.0).unwrap() - 3.0).abs() < 1e-15);
        let er = erlang_rep(ErlangSpec { n: 2, lambda: 1.0 }).unwrap();
        assert_eq!(er.t(), &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]));
        assert_eq!(er.pi().as_slice(), &[1.0, 0.0]);
        let er19 = erlang_rep(ErlangSpec { n: 19, lambda: 3.340752 }).unwrap();
        assert!((er19.mean() - 19.0 / 3.340752).abs() < 1e-12);
    }

    #[test]
    fn rejects_positive_row_sum() {
        let t = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -1.0]);
        assert!(matches!(PHDist::new(vec![0.5, 0.5], t, true), Err(Error::Validation { .. })));
    }

    #[test]
    fn rejects_bad_initial_vector() {
        let t = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(PHDist::new(vec![0.9], t.clone(), true).is_err());
        assert!(PHDist::new(vec![-0.1], t, true).is_err());
    }

    #[test]
    fn matrix_exponential_example() {
        let t = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -101.0, -103.0, -3.0]);
        let d = PHDist::matrix_exponential(vec![101.0, 0.0, 0.0], t, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(!d.is_markov());
        let x = std::f64::consts::PI / 10.0;
        let want = 101.0 / 50.0 * (-x).exp();
        assert!((d.pdf(x).unwrap() - want).abs() < 1e-12);
        assert!(matches!(d.sample(&mut ChaCha8Rng::seed_from_u64(1), 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn frac_moment_reduces_to_mean() {
        let d = gen_erlang_rep(&[1.0, 2.5, 0.7]).unwrap();
        assert!((d.frac_moment(1.0).unwrap() - d.mean()).abs() < 1e-10);
        assert!((d.frac_moment(0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(d.frac_moment(-1.0).is_err());
    }

    #[test]
    fn log_moment_of_exponential() {
        let d = PHDist::exponential(1.0).unwrap();
        assert!((d.log_moment().unwrap() + EULER_GAMMA).abs() < 1e-15);
        let d = PHDist::exponential(4.0).unwrap();
        assert!((d.log_moment().unwrap() + EULER_GAMMA + 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn quantile_inverts_sf() {
        let d = erlang_rep(ErlangSpec { n: 3, lambda: 2.0 }).unwrap();
        for p in [0.01, 0.5, 0.9, 0.999] {
            let q = d.quantile(p).unwrap();
            assert!((d.cdf(q).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let d = erlang_rep(ErlangSpec { n: 2, lambda: 1.0 }).unwrap();
        let a = d.sample_seeded(7, 10_000, Parallelism::Sequential).unwrap();
        let b = d.sample_seeded(7, 10_000, Parallelism::Deterministic).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d.sample_seeded(8, 10_000, Parallelism::Sequential).unwrap());
    }

    #[test]
    fn negative_argument_is_domain_error() {
        let d = PHDist::exponential(1.0).unwrap();
        assert!(matches!(d.pdf(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn mixture_density_at_zero() {
        let spec = MixtureSpec {
            weights: vec![0.5, 0.5],
            components: vec![PHDist::exponential(1.0).unwrap(), PHDist::exponential(2.0).unwrap()],
        };
        let m = mixture_rep(&spec).unwrap();
        assert!((m.pdf(0.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((m.mean() - 0.75).abs() < 1e-15);
        let bad = MixtureSpec {
            weights: vec![0.5, 0.4],
            components: spec.components.clone(),
        };
        assert!(mixture_rep(&bad).is_err());
    }
}
