//! Maximum-likelihood fitting of phase-type laws.
//!
//! The EM algorithm treats the absorbing Markov path behind each
//! observation as missing data. Conditional expectations of starts,
//! sojourns, jumps and exits come from one exponential of the block
//! matrix `[[T, tπ], [0, T]] y` per distinct data value: its diagonal
//! blocks are `e^{Ty}` and its upper-right block is
//! `J(y) = ∫_0^y e^{Tu} t π e^{T(y-u)} du`.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::families::{Transform, TransformedPH};
use crate::matfun::mat_exp;
use crate::par::{map_reduce, Parallelism};
use crate::phcore::{erlang_rep, ErlangSpec, PHDist};

/// Threshold, relative to total expected sojourn, below which a state is
/// treated as degenerate.
const FREEZE_REL: f64 = 1e-12;
/// Entries of the fitted `T` below this fraction of its largest entry are
/// reported as structural zeros.
const SPARSITY_REL: f64 = 1e-8;

/// `Σ log f(y_i)`; `-∞` if some density vanishes.
pub fn ph_loglik(d: &PHDist, data: &[f64]) -> Result<f64> {
    check_data(data)?;
    map_reduce(
        data,
        Parallelism::Deterministic,
        |_, &y| d.pdf(y).map(|f| if f > 0.0 { f.ln() } else { f64::NEG_INFINITY }),
        || Ok(0.0),
        |a, b| Ok(a? + b?),
    )
}

fn check_data(data: &[f64]) -> Result<()> {
    if data.is_empty() {
        return invalid("data set is empty");
    }
    if let Some((i, y)) = data.iter().enumerate().find(|(_, y)| !(**y > 0.0 && y.is_finite())) {
        return invalid(format!("data must be positive and finite, entry {i} is {y}"));
    }
    Ok(())
}

/// Sorted distinct values with multiplicities.
fn aggregate(data: &[f64]) -> Vec<(f64, f64)> {
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for x in xs {
        match out.last_mut() {
            Some((v, c)) if *v == x => *c += 1.0,
            _ => out.push((x, 1.0)),
        }
    }
    out
}

/// Expected complete-data statistics summed over the data.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepStats {
    /// Expected number of paths starting in each state.
    pub starts: DVector<f64>,
    /// Expected total time spent in each state.
    pub sojourn: DVector<f64>,
    /// Expected number of `i -> j` jumps.
    pub jumps: DMatrix<f64>,
    /// Expected number of exits from each state.
    pub exits: DVector<f64>,
    /// Log-likelihood of the current parameters.
    pub loglik: f64,
    /// Total weight (number of observations).
    pub weight: f64,
}

impl EStepStats {
    fn zero(p: usize) -> Self {
        Self {
            starts: DVector::zeros(p),
            sojourn: DVector::zeros(p),
            jumps: DMatrix::zeros(p, p),
            exits: DVector::zeros(p),
            loglik: 0.0,
            weight: 0.0,
        }
    }

    fn add(mut self, o: Self) -> Self {
        self.starts += o.starts;
        self.sojourn += o.sojourn;
        self.jumps += o.jumps;
        self.exits += o.exits;
        self.loglik += o.loglik;
        self.weight += o.weight;
        self
    }
}

fn point_stats(d: &PHDist, c: &DMatrix<f64>, y: f64, w: f64) -> Result<EStepStats> {
    let p = d.dim();
    let e = mat_exp(&(c * y))?;
    let ety = e.view((0, 0), (p, p));
    let j = e.view((0, p), (p, p));
    let a: RowDVector<f64> = d.pi() * ety;
    let b: DVector<f64> = ety * d.exit();
    let f = (&a * d.exit())[(0, 0)];
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::Domain(format!("density is {f} at data value {y}; the E-step is undefined")));
    }
    let s = w / f;
    let t = d.t();
    let mut jumps = DMatrix::zeros(p, p);
    for r in 0..p {
        for col in 0..p {
            if r != col && t[(r, col)] != 0.0 {
                jumps[(r, col)] = s * t[(r, col)] * j[(col, r)];
            }
        }
    }
    Ok(EStepStats {
        starts: d.pi().transpose().component_mul(&b) * s,
        sojourn: DVector::from_iterator(p, (0..p).map(|i| s * j[(i, i)])),
        jumps,
        exits: d.exit().component_mul(&a.transpose()) * s,
        loglik: w * f.ln(),
        weight: w,
    })
}

/// Expected statistics for `data` under `d`.
pub fn e_step(d: &PHDist, data: &[f64], mode: Parallelism) -> Result<EStepStats> {
    check_data(data)?;
    if !d.is_markov() {
        return Err(Error::Unsupported("EM needs a Markovian representation".into()));
    }
    let p = d.dim();
    let mut c = DMatrix::zeros(2 * p, 2 * p);
    c.view_mut((0, 0), (p, p)).copy_from(d.t());
    c.view_mut((p, p), (p, p)).copy_from(d.t());
    c.view_mut((0, p), (p, p)).copy_from(&(d.exit() * d.pi()));
    let points = aggregate(data);
    map_reduce(
        &points,
        mode,
        |_, &(y, w)| point_stats(d, &c, y, w),
        || Ok(EStepStats::zero(p)),
        |a, b| Ok(a?.add(b?)),
    )
}

/// M-step from expected statistics. States with sojourn below
/// `1e-12 × total` keep the rows of `prev`; their indices are returned.
pub fn m_step(prev: &PHDist, stats: &EStepStats) -> Result<(PHDist, Vec<usize>)> {
    let p = prev.dim();
    let total: f64 = stats.sojourn.sum();
    let mut t = DMatrix::zeros(p, p);
    let mut frozen = Vec::new();
    for i in 0..p {
        let z = stats.sojourn[i];
        if !(z > FREEZE_REL * total) {
            frozen.push(i);
            t.row_mut(i).copy_from(&prev.t().row(i));
            continue;
        }
        let mut out = stats.exits[i] / z;
        for j in 0..p {
            if j != i {
                let v = stats.jumps[(i, j)] / z;
                t[(i, j)] = v;
                out += v;
            }
        }
        t[(i, i)] = -out;
    }
    let pi: Vec<f64> = stats.starts.iter().map(|s| s / stats.weight).collect();
    let sum: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|v| v / sum).collect();
    Ok((PHDist::new(pi, t, true)?, frozen))
}

/// One EM update. A state with (numerically) zero expected sojourn is an
/// error here; [`fit_ph_em`] freezes such states instead.
pub fn em_step(d: &PHDist, data: &[f64]) -> Result<PHDist> {
    let stats = e_step(d, data, Parallelism::Deterministic)?;
    let (next, frozen) = m_step(d, &stats)?;
    match frozen.first() {
        Some(&state) => Err(Error::DegenerateState { state }),
        None => Ok(next),
    }
}

/// Starting point of the EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum FitInit {
    /// Uniform(0.1, 1) rates and random initial vector, rescaled to the
    /// sample mean.
    Random(u64),
    /// Coxian skeleton: start in state 0, feed forward to the next state or
    /// exit. Mean matched to the sample.
    Structured,
    User(PHDist),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub phases: usize,
    pub max_iters: usize,
    pub loglik_rel_tol: f64,
    pub init: FitInit,
    pub mode: Parallelism,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            phases: 1,
            max_iters: 2000,
            loglik_rel_tol: 1e-8,
            init: FitInit::Random(0),
            mode: Parallelism::Deterministic,
        }
    }
}

impl FitConfig {
    pub fn with_phases(phases: usize) -> Self {
        Self {
            phases,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.phases == 0 {
            return invalid("phases must be at least 1");
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        if !(self.loglik_rel_tol > 0.0) {
            return invalid(format!("loglik_rel_tol must be positive, got {}", self.loglik_rel_tol));
        }
        if let FitInit::User(d) = &self.init {
            if d.dim() != self.phases {
                return invalid(format!("initial law has {} phases, config asks for {}", d.dim(), self.phases));
            }
        }
        Ok(())
    }
}

/// An entry of the fitted generator reported as a structural zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub fitted: PHDist,
    /// Log-likelihood of every iterate, starting with the initial law.
    pub loglik_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub sparsity_report: Vec<SparseEntry>,
    pub warnings: Vec<String>,
    /// Set by [`fit_transformed`]: log-likelihood of the untransformed data.
    pub original_loglik: Option<f64>,
}

impl FitResult {
    /// Log-likelihood of the fitted law on the data it was fitted to.
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial value")
    }
}

fn initial(data: &[f64], cfg: &FitConfig) -> Result<PHDist> {
    let p = cfg.phases;
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let (pi, mut t) = match &cfg.init {
        FitInit::User(d) => return Ok(d.clone()),
        FitInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let pi: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = pi.iter().sum();
            let pi: Vec<f64> = pi.iter().map(|v| v / s).collect();
            let mut t = DMatrix::zeros(p, p);
            for i in 0..p {
                let mut out = rng.random_range(0.1..1.0);
                for j in 0..p {
                    if i != j {
                        let v = rng.random_range(0.1..1.0);
                        t[(i, j)] = v;
                        out += v;
                    }
                }
                t[(i, i)] = -out;
            }
            (pi, t)
        }
        FitInit::Structured => {
            let mut pi = vec![0.0; p];
            pi[0] = 1.0;
            let mut t = DMatrix::zeros(p, p);
            for i in 0..p {
                t[(i, i)] = -1.0;
                if i + 1 < p {
                    // mostly feed forward, with a little early exit
                    t[(i, i + 1)] = 0.9;
                }
            }
            (pi, t)
        }
    };
    let d = PHDist::new(pi.clone(), t.clone(), true)?;
    t *= d.mean() / mean;
    PHDist::new(pi, t, true)
}

fn sparsity(t: &DMatrix<f64>) -> Vec<SparseEntry> {
    let thr = SPARSITY_REL * t.amax();
    let mut out = Vec::new();
    for i in 0..t.nrows() {
        for j in 0..t.ncols() {
            if t[(i, j)].abs() < thr {
                out.push(SparseEntry {
                    row: i,
                    col: j,
                    value: t[(i, j)],
                });
            }
        }
    }
    out
}

/// Iterates EM until the relative log-likelihood gain drops below
/// `loglik_rel_tol` or `max_iters` updates have been made.
pub fn fit_ph_em(data: &[f64], cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    check_data(data)?;
    let mut d = initial(data, cfg)?;
    if !d.is_markov() {
        return Err(Error::Unsupported("EM needs a Markovian initial law".into()));
    }
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut frozen_seen: Vec<usize> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let stats = e_step(&d, data, cfg.mode)?;
        let ll = stats.loglik;
        if let Some(&prev) = trace.last() {
            let gain: f64 = ll - prev;
            if gain.abs() <= cfg.loglik_rel_tol * f64::abs(prev) {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iterations == cfg.max_iters {
            break;
        }
        let (next, frozen) = m_step(&d, &stats)?;
        for s in frozen {
            if !frozen_seen.contains(&s) {
                frozen_seen.push(s);
                warnings.push(format!(
                    "state {s} has negligible expected sojourn at iteration {}; its rates were frozen",
                    iterations + 1
                ));
            }
        }
        d = next;
        iterations += 1;
    }
    Ok(FitResult {
        sparsity_report: sparsity(d.t()),
        fitted: d,
        loglik_trace: trace,
        iterations_run: iterations,
        converged,
        warnings,
        original_loglik: None,
    })
}

/// Fits `Y = g(X + shift)` by running EM on `g^{-1}(y_i) - shift`.
///
/// For `ParetoExp` the `beta` field is read as the ratio `β / μ` (the
/// usual choice is 1, giving `X = log(1 + y) - shift`); the returned law
/// carries `β = ratio × μ̂` with `μ̂` the fitted mean.
pub fn fit_transformed(
    data: &[f64],
    transform: Transform,
    shift: f64,
    cfg: &FitConfig,
) -> Result<(TransformedPH, FitResult)> {
    if data.is_empty() {
        return invalid("data set is empty");
    }
    if !(shift >= 0.0 && shift.is_finite()) {
        return invalid(format!("shift must be finite and nonnegative, got {shift}"));
    }
    // With reference μ = 1, ParetoExp{beta: ratio} has g^{-1}(y) = log(1 + y/ratio).
    let probe = TransformedPH::from_parts(PHDist::exponential(1.0)?, transform, 1.0, shift)?;
    let xs: Vec<f64> = data.iter().map(|&y| probe.to_base(y)).collect();
    let bad: Vec<usize> = xs
        .iter()
        .enumerate()
        .filter(|(_, x)| !(**x > 0.0 && x.is_finite()))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::ShiftTooLarge { indices: bad });
    }
    let mut fit = fit_ph_em(&xs, cfg)?;
    let mu = fit.fitted.mean();
    let transform = match transform {
        Transform::ParetoExp { beta } => Transform::ParetoExp { beta: beta * mu },
        t => t,
    };
    let model = TransformedPH::from_parts(fit.fitted.clone(), transform, mu, shift)?;
    let jac: f64 = data.iter().map(|&y| probe.transform().g_inv_jacobian(y, 1.0).ln()).sum();
    fit.original_loglik = Some(fit.loglik() + jac);
    Ok((model, fit))
}

/// Closed-form rate MLE for an Erlang law with `n` phases, and its
/// log-likelihood.
pub fn fit_erlang_rate(data: &[f64], n: usize) -> Result<(f64, f64)> {
    check_data(data)?;
    if n == 0 {
        return invalid("Erlang order must be at least 1");
    }
    let lambda = (n * data.len()) as f64 / data.iter().sum::<f64>();
    let ll = ph_loglik(&erlang_rep(ErlangSpec { n, lambda })?, data)?;
    Ok((lambda, ll))
}
