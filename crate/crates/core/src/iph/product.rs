//! Product integrals `∏_s^t (I + T(u) du)` of sub-intensity matrix paths.
//!
//! Computed as the value at `t` of `dM/du = M T(u)`, `M(s) = I`, with an
//! embedded Dormand-Prince 5(4) pair. Declared breakpoints split the
//! interval so that discontinuities of `T(·)` never fall inside a step.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::RateFunction;
use crate::error::{invalid, Error, Result};

type PathFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// A time-indexed family of sub-intensity matrices.
#[derive(Clone)]
pub struct MatrixRatePath {
    eval: PathFn,
    breakpoints: Vec<f64>,
    dim: usize,
    description: String,
}

impl fmt::Debug for MatrixRatePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixRatePath")
            .field("description", &self.description)
            .field("dim", &self.dim)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl MatrixRatePath {
    pub fn new(
        description: impl Into<String>,
        dim: usize,
        eval: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            breakpoints: Vec::new(),
            dim,
            description: description.into(),
        }
    }

    /// Points where `T(·)` may jump; the path is taken right-continuous.
    pub fn with_breakpoints(mut self, mut points: Vec<f64>) -> Self {
        points.sort_by(f64::total_cmp);
        points.dedup();
        self.breakpoints = points;
        self
    }

    /// `T(u) ≡ T`
    pub fn constant(t: DMatrix<f64>) -> Self {
        let dim = t.nrows();
        Self::new("constant", dim, move |_| t.clone())
    }

    /// `T(u) = λ(u) T`
    pub fn scaled(t: DMatrix<f64>, rate: RateFunction) -> Self {
        let dim = t.nrows();
        let name = format!("{} * T", rate.name());
        Self::new(name, dim, move |u| &t * rate.eval(u))
    }

    /// `A` on `u < at`, `B` on `u >= at`.
    pub fn piecewise(a: DMatrix<f64>, b: DMatrix<f64>, at: f64) -> Self {
        let dim = a.nrows();
        Self::new(format!("piecewise at {at}"), dim, move |u| if u < at { a.clone() } else { b.clone() })
            .with_breakpoints(vec![at])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `T(u)`, checked for sub-intensity structure.
    pub fn eval(&self, u: f64) -> Result<DMatrix<f64>> {
        let t = (self.eval)(u);
        let p = self.dim;
        if t.nrows() != p || t.ncols() != p {
            return invalid(format!("path returned a {}x{} matrix, expected {p}x{p}", t.nrows(), t.ncols()));
        }
        let tol = 1e-12 * t.amax().max(1.0);
        for i in 0..p {
            let mut row = 0.0;
            for j in 0..p {
                let v = t[(i, j)];
                if !v.is_finite() || (i != j && v < 0.0) {
                    return Err(Error::Validation {
                        constraint: format!("T({u})[{i},{j}] = {v} violates sub-intensity structure"),
                    });
                }
                row += v;
            }
            if t[(i, i)] >= 0.0 || row > tol {
                return Err(Error::Validation {
                    constraint: format!("T({u}) row {i} has diagonal {} and sum {row}", t[(i, i)]),
                });
            }
        }
        Ok(t)
    }
}

/// Step control for [`product_integral`].
#[derive(Debug, Clone, Copy)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// `∏_s^t (I + T(u) du)`, the transient block of the transition matrix
/// from time `s` to time `t`.
pub fn product_integral(path: &MatrixRatePath, s: f64, t: f64, cfg: &OdeConfig) -> Result<DMatrix<f64>> {
    if !(s.is_finite() && t.is_finite()) || s > t {
        return invalid(format!("product integral needs finite s <= t, got [{s}, {t}]"));
    }
    let p = path.dim();
    let mut m = DMatrix::<f64>::identity(p, p);
    if s == t {
        return Ok(m);
    }
    let mut knots = vec![s];
    knots.extend(path.breakpoints().iter().copied().filter(|&b| b > s && b < t));
    knots.push(t);
    let mut steps = 0;
    for w in knots.windows(2) {
        m = integrate_segment(path, m, w[0], w[1], cfg, &mut steps)?;
    }
    Ok(m)
}

fn integrate_segment(
    path: &MatrixRatePath,
    mut m: DMatrix<f64>,
    a: f64,
    b: f64,
    cfg: &OdeConfig,
    steps: &mut usize,
) -> Result<DMatrix<f64>> {
    // Evaluate strictly inside [a, b) so a jump at b is seen from the left.
    let last_inside = b - (b.abs() * 4.0 * f64::EPSILON).max(f64::MIN_POSITIVE);
    let field = |u: f64| path.eval(u.min(last_inside).max(a));
    let mut u = a;
    let norm0 = field(a)?.amax().max(1e-12);
    let mut h = (0.05 / norm0).min(b - a);
    let mut k1 = &m * field(u)?;
    let mut last_err = 0.0;
    while u < b {
        if *steps >= cfg.max_steps {
            return Err(Error::Integration {
                message: format!("step budget of {} exhausted at u = {u}", cfg.max_steps),
                achieved: last_err,
            });
        }
        let h_try = h.min(b - u);
        if h_try <= 1e-14 * u.abs().max(1.0) && u + h_try < b {
            return Err(Error::Integration {
                message: format!("step size underflow at u = {u}"),
                achieved: last_err,
            });
        }
        let mut k: Vec<DMatrix<f64>> = Vec::with_capacity(7);
        k.push(k1.clone());
        for i in 1..7 {
            let mut y = m.clone();
            for (j, kj) in k.iter().enumerate() {
                let aij = A[i][j];
                if aij != 0.0 {
                    y += kj * (h_try * aij);
                }
            }
            k.push(&y * field(u + C[i] * h_try)?);
        }
        // stage 7 is evaluated at the fifth-order solution (FSAL)
        let mut y5 = m.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                y5 += kj * (h_try * A[6][j]);
            }
        }
        let mut err = 0.0f64;
        for idx in 0..m.len() {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[idx];
            }
            let scale = cfg.abs_tol + cfg.rel_tol * m[idx].abs().max(y5[idx].abs());
            err = err.max((h_try * e).abs() / scale);
        }
        *steps += 1;
        if !err.is_finite() {
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            u += h_try;
            if b - u <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
                u = b;
            }
            m = y5;
            k1 = k.pop().expect("seven stages");
            last_err = err;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * factor;
    }
    Ok(m)
}

/// `π ∏_0^x (I + T(u) du) e`
pub fn iph_general_sf(pi: &[f64], path: &MatrixRatePath, x: f64, cfg: &OdeConfig) -> Result<f64> {
    if !(x >= 0.0) {
        return crate::error::domain(format!("argument must be nonnegative, got {x}"));
    }
    if pi.len() != path.dim() {
        return invalid(format!("π has length {} for a {}-state path", pi.len(), path.dim()));
    }
    let m = product_integral(path, 0.0, x, cfg)?;
    let e = DVector::from_element(path.dim(), 1.0);
    let v = m * e;
    Ok(pi.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>().clamp(0.0, 1.0))
}
