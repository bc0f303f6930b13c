//! Adaptive Gauss-Kronrod (7/15) quadrature with global error control.
//!
//! The integrand may be vector valued: anything implementing [`Integrand`]
//! works, which lets a single pass integrate every Taylor coefficient of a
//! parameter-dependent integral at once.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that can be accumulated by the integrator.
pub trait Integrand: Clone {
    fn zeros_like(&self) -> Self;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn norm(&self) -> f64;
}

impl Integrand for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zeros_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

impl<T: Integrand> Integrand for Vec<T> {
    fn zeros_like(&self) -> Self {
        self.iter().map(Integrand::zeros_like).collect()
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, xi) in self.iter_mut().zip(x) {
            s.axpy(a, xi);
        }
    }
    fn norm(&self) -> f64 {
        self.iter().map(Integrand::norm).fold(0.0, f64::max)
    }
}

impl Integrand for DMatrix<f64> {
    fn zeros_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
    fn norm(&self) -> f64 {
        self.amax()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Quadrature<V> {
    pub value: V,
    pub error: f64,
    pub intervals: usize,
}

struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<V: Integrand, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> (V, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc.zeros_like();
    let mut gauss = fc.zeros_like();
    kronrod.axpy(WGK[7], &fc);
    gauss.axpy(WG[3], &fc);
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod.axpy(WGK[j], &f1);
        kronrod.axpy(WGK[j], &f2);
        if j % 2 == 1 {
            gauss.axpy(WG[j / 2], &f1);
            gauss.axpy(WG[j / 2], &f2);
        }
    }
    let mut diff = kronrod.clone();
    diff.axpy(-1.0, &gauss);
    let mut value = kronrod.zeros_like();
    value.axpy(half, &kronrod);
    let err = (diff.norm() * half.abs()).max(f64::EPSILON * 4.0 * value.norm());
    (value, err)
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Returns an [`Error::Integration`] carrying the achieved error estimate when
/// the tolerance cannot be met within `max_intervals` subdivisions.
pub fn integrate<V, F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Quadrature<V>>
where
    V: Integrand,
    F: Fn(f64) -> V,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    let (value, error) = gk15(&f, a, b);
    let mut total = value.clone();
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut intervals = 1;
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.norm());
        if total_err <= target {
            break;
        }
        if !total.norm().is_finite() {
            return Err(Error::Integration {
                message: "integrand produced non-finite values".into(),
                achieved: f64::INFINITY,
            });
        }
        if intervals >= cfg.max_intervals {
            return Err(Error::Integration {
                message: format!("tolerance {target:e} not reached with {intervals} intervals"),
                achieved: total_err,
            });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further in floating point.
            heap.push(seg);
            return Err(Error::Integration {
                message: "interval became too small".into(),
                achieved: total_err,
            });
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total.axpy(-1.0, &seg.value);
        total.axpy(1.0, &v1);
        total.axpy(1.0, &v2);
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        intervals += 1;
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let mut value = total.zeros_like();
    let mut error = 0.0;
    for seg in heap.iter() {
        value.axpy(1.0, &seg.value);
        error += seg.error;
    }
    Ok(Quadrature { value, error, intervals })
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<V, F>(f: F, a: f64, cfg: &QuadConfig) -> Result<Quadrature<V>>
where
    V: Integrand,
    F: Fn(f64) -> V,
{
    let g = |t: f64| {
        let one_minus = 1.0 - t;
        let x = a + t / one_minus;
        let jac = 1.0 / (one_minus * one_minus);
        let v = f(x);
        let mut out = v.zeros_like();
        if jac.is_finite() {
            out.axpy(jac, &v);
        }
        out
    };
    integrate(g, 0.0, 1.0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadConfig::default()).unwrap();
        assert!((q.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let q = integrate_to_infinity(|x: f64| (-x).exp(), 1.0, &QuadConfig::default()).unwrap();
        assert!((q.value - (-1.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn vector_valued() {
        let q = integrate(
            |x: f64| vec![x, x * x, Complex64::new(0.0, x).exp().re],
            0.0,
            1.0,
            &QuadConfig::default(),
        )
        .unwrap();
        assert!((q.value[0] - 0.5).abs() < 1e-14);
        assert!((q.value[1] - 1.0 / 3.0).abs() < 1e-14);
        assert!((q.value[2] - 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn rejects_infinite_limits() {
        assert!(integrate(|x: f64| x, 0.0, f64::INFINITY, &QuadConfig::default()).is_err());
    }
}
