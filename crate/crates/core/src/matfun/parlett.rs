//! Schur-Parlett evaluation of `h(A)` for analytic scalar `h`.
//!
//! `A` is reduced to complex upper triangular form `A = Q T Q^H`. Eigenvalues
//! are grouped into clusters, the Schur form is reordered so that each
//! cluster occupies a contiguous diagonal block, `h` is applied to every
//! diagonal block through a Taylor expansion about the block mean, and the
//! off-diagonal blocks follow from the block Parlett recurrence (one
//! triangular Sylvester solve per block pair).

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::expm::check_square_finite;
use crate::error::{Error, Result};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A scalar function analytic on a neighbourhood of the spectrum.
pub trait ScalarFunction: Sync {
    /// `h(z)`, or `None` where `h` is not defined.
    fn eval(&self, z: C64) -> Option<C64>;

    /// Taylor coefficients `h^(k)(z) / k!` for `k = 0..=order`.
    ///
    /// Returning `None` means no derivative oracle is available; the
    /// evaluator then falls back to numerical differentiation on a circle.
    fn taylor(&self, _z: C64, _order: usize) -> Option<Vec<C64>> {
        None
    }
}

/// `e^z`
#[derive(Debug, Clone, Copy, Default)]
pub struct Exp;

impl ScalarFunction for Exp {
    fn eval(&self, z: C64) -> Option<C64> {
        Some(z.exp())
    }
    fn taylor(&self, z: C64, order: usize) -> Option<Vec<C64>> {
        let mut c = Vec::with_capacity(order + 1);
        let mut term = z.exp();
        for k in 0..=order {
            if k > 0 {
                term /= k as f64;
            }
            c.push(term);
        }
        Some(c)
    }
}

/// Principal logarithm. Undefined on the closed negative real axis.
#[derive(Debug, Clone, Copy, Default)]
pub struct Log;

impl ScalarFunction for Log {
    fn eval(&self, z: C64) -> Option<C64> {
        if z.im == 0.0 && z.re <= 0.0 {
            None
        } else {
            Some(z.ln())
        }
    }
    fn taylor(&self, z: C64, order: usize) -> Option<Vec<C64>> {
        let mut c = vec![self.eval(z).unwrap_or(C64::new(f64::NAN, 0.0))];
        let inv = z.inv();
        let mut p = ONE;
        for k in 1..=order {
            p *= inv;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            c.push(p * (sign / k as f64));
        }
        Some(c)
    }
}

/// Principal power `z^p = exp(p log z)`.
#[derive(Debug, Clone, Copy)]
pub struct Power(pub f64);

impl ScalarFunction for Power {
    fn eval(&self, z: C64) -> Option<C64> {
        if self.0 == 0.0 {
            return Some(ONE);
        }
        if z.im == 0.0 && z.re <= 0.0 {
            if z.re == 0.0 && self.0 > 0.0 {
                return Some(ZERO);
            }
            return None;
        }
        Some((z.ln() * self.0).exp())
    }
    fn taylor(&self, z: C64, order: usize) -> Option<Vec<C64>> {
        // binom(p, k) z^(p-k)
        let mut c = Vec::with_capacity(order + 1);
        let Some(base) = self.eval(z) else {
            return Some(vec![C64::new(f64::NAN, 0.0); order + 1]);
        };
        let inv = z.inv();
        let mut coef = ONE;
        let mut zp = base;
        for k in 0..=order {
            if k > 0 {
                coef *= (self.0 - (k - 1) as f64) / k as f64;
                zp *= inv;
            }
            c.push(coef * zp);
        }
        Some(c)
    }
}

/// Wraps a closure with no derivative oracle.
pub struct FnScalar<F>(pub F);

impl<F> ScalarFunction for FnScalar<F>
where
    F: Fn(C64) -> Option<C64> + Sync,
{
    fn eval(&self, z: C64) -> Option<C64> {
        (self.0)(z)
    }
}

/// Wraps a closure together with a Taylor-coefficient oracle.
pub struct TaylorScalar<F, G> {
    pub eval: F,
    pub taylor: G,
}

impl<F, G> ScalarFunction for TaylorScalar<F, G>
where
    F: Fn(C64) -> Option<C64> + Sync,
    G: Fn(C64, usize) -> Vec<C64> + Sync,
{
    fn eval(&self, z: C64) -> Option<C64> {
        (self.eval)(z)
    }
    fn taylor(&self, z: C64, order: usize) -> Option<Vec<C64>> {
        Some((self.taylor)(z, order))
    }
}

/// Tolerances for the Schur-Parlett evaluator.
#[derive(Debug, Clone, Copy)]
pub struct MatFunConfig {
    /// Eigenvalues closer than `cluster_abs * ‖A‖_F` share a block.
    pub cluster_abs: f64,
    /// Eigenvalues closer than `cluster_rel * max(|λi|, |λj|)` share a block.
    pub cluster_rel: f64,
    /// Hard cap on Taylor terms for a cluster block.
    pub max_taylor_terms: usize,
    /// Radius of the differentiation circle used when no oracle is given.
    /// `None` picks `max(2ρ, |σ|/2, 1e-2)` from the cluster centre `σ`
    /// and radius `ρ`.
    pub fallback_radius: Option<f64>,
}

impl Default for MatFunConfig {
    fn default() -> Self {
        Self {
            cluster_abs: 1e-7,
            cluster_rel: 0.1,
            max_taylor_terms: 400,
            fallback_radius: None,
        }
    }
}

/// A reordered Schur decomposition ready for repeated function evaluation.
#[derive(Debug, Clone)]
pub struct SchurParlett {
    q: Option<DMatrix<C64>>,
    t: DMatrix<C64>,
    blocks: Vec<Range<usize>>,
    cfg: MatFunConfig,
}

impl SchurParlett {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        Self::with_config(a, MatFunConfig::default())
    }

    pub fn with_config(a: &DMatrix<f64>, cfg: MatFunConfig) -> Result<Self> {
        check_square_finite(a)?;
        let n = a.nrows();
        let ac = a.map(|v| C64::new(v, 0.0));
        let upper = (0..n).all(|i| (0..i).all(|j| a[(i, j)] == 0.0));
        let (mut q, mut t) = if upper {
            (None, ac)
        } else {
            let schur = nalgebra::linalg::Schur::try_new(ac, f64::EPSILON, 10_000)
                .ok_or_else(|| Error::Singular("Schur decomposition did not converge".into()))?;
            let (q, mut t) = schur.unpack();
            for j in 0..n {
                for i in j + 1..n {
                    t[(i, j)] = ZERO;
                }
            }
            (Some(q), t)
        };

        let norm = a.norm();
        let labels = cluster_labels(&t, cfg.cluster_abs * norm, cfg.cluster_rel);
        let blocks = reorder(&mut t, &mut q, labels);
        Ok(Self { q, t, blocks, cfg })
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Diagonal block ranges of the reordered triangular factor.
    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    /// Evaluates `h(A)` and returns the real part.
    pub fn apply(&self, h: &dyn ScalarFunction) -> Result<DMatrix<f64>> {
        Ok(self.apply_complex(h)?.map(|z| z.re))
    }

    /// Evaluates `h(A)` in complex arithmetic.
    pub fn apply_complex(&self, h: &dyn ScalarFunction) -> Result<DMatrix<C64>> {
        let n = self.t.nrows();
        for i in 0..n {
            let lambda = self.t[(i, i)];
            match h.eval(lambda) {
                Some(v) if v.re.is_finite() && v.im.is_finite() => {}
                _ => return Err(Error::MatFunDomain { eigenvalue: lambda }),
            }
        }
        let mut f = DMatrix::from_element(n, n, ZERO);
        let m = self.blocks.len();
        for j in 0..m {
            let bj = self.blocks[j].clone();
            let fjj = self.diagonal_block(h, bj.clone())?;
            f.view_mut((bj.start, bj.start), (bj.len(), bj.len())).copy_from(&fjj);
            for i in (0..j).rev() {
                let bi = self.blocks[i].clone();
                let fij = self.off_diagonal_block(&f, i, j)?;
                f.view_mut((bi.start, bj.start), (bi.len(), bj.len())).copy_from(&fij);
            }
        }
        Ok(match &self.q {
            Some(q) => q * f * q.adjoint(),
            None => f,
        })
    }

    fn diagonal_block(&self, h: &dyn ScalarFunction, r: Range<usize>) -> Result<DMatrix<C64>> {
        let size = r.len();
        if size == 1 {
            let lambda = self.t[(r.start, r.start)];
            let v = h.eval(lambda).ok_or(Error::MatFunDomain { eigenvalue: lambda })?;
            return Ok(DMatrix::from_element(1, 1, v));
        }
        let tb = self.t.view((r.start, r.start), (size, size)).clone_owned();
        let sigma = (0..size).map(|i| tb[(i, i)]).sum::<C64>() / size as f64;
        let rho = (0..size).map(|i| (tb[(i, i)] - sigma).norm()).fold(0.0, f64::max);
        let mut m = tb;
        for i in 0..size {
            m[(i, i)] -= sigma;
        }
        let nilpotent = rho == 0.0;

        let mut order = if nilpotent { size - 1 } else { size + 24 };
        loop {
            let coeffs = self.taylor_coefficients(h, sigma, rho, order)?;
            if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::MatFunDomain { eigenvalue: sigma });
            }
            let mut sum = DMatrix::<C64>::identity(size, size) * coeffs[0];
            let mut power = DMatrix::<C64>::identity(size, size);
            let mut small_run = 0;
            let mut last_term = 0.0;
            let mut converged = nilpotent;
            for (k, ck) in coeffs.iter().enumerate().skip(1) {
                power = &power * &m;
                let term = &power * *ck;
                last_term = term.norm();
                sum += term;
                if !nilpotent && k >= size {
                    if last_term <= f64::EPSILON * sum.norm() {
                        small_run += 1;
                        if small_run >= 2 {
                            converged = true;
                            break;
                        }
                    } else {
                        small_run = 0;
                    }
                }
            }
            if converged {
                return Ok(sum);
            }
            if order >= self.cfg.max_taylor_terms {
                return Err(Error::NonConvergence { terms: order + 1, last_term });
            }
            order = (order * 2).min(self.cfg.max_taylor_terms);
        }
    }

    fn taylor_coefficients(&self, h: &dyn ScalarFunction, sigma: C64, rho: f64, order: usize) -> Result<Vec<C64>> {
        if let Some(c) = h.taylor(sigma, order) {
            if c.len() < order + 1 {
                return Err(Error::InvalidArgument(format!(
                    "Taylor oracle returned {} coefficients, {} requested",
                    c.len(),
                    order + 1
                )));
            }
            return Ok(c);
        }
        let radius = self
            .cfg
            .fallback_radius
            .unwrap_or_else(|| (2.0 * rho).max(0.5 * sigma.norm()).max(1e-2));
        cauchy_coefficients(h, sigma, radius, order)
    }

    fn off_diagonal_block(&self, f: &DMatrix<C64>, i: usize, j: usize) -> Result<DMatrix<C64>> {
        let bi = self.blocks[i].clone();
        let bj = self.blocks[j].clone();
        let t = &self.t;
        let view = |m: &DMatrix<C64>, r: &Range<usize>, c: &Range<usize>| {
            m.view((r.start, c.start), (r.len(), c.len())).clone_owned()
        };
        let tii = view(t, &bi, &bi);
        let tjj = view(t, &bj, &bj);
        let tij = view(t, &bi, &bj);
        let fii = view(f, &bi, &bi);
        let fjj = view(f, &bj, &bj);
        let mut rhs = &fii * &tij - &tij * &fjj;
        for k in i + 1..j {
            let bk = self.blocks[k].clone();
            rhs += view(f, &bi, &bk) * view(t, &bk, &bj) - view(t, &bi, &bk) * view(f, &bk, &bj);
        }
        solve_triangular_sylvester(&tii, &tjj, rhs)
    }
}

/// Taylor coefficients by the trapezoidal rule on a circle of `radius`
/// around `centre` (Cauchy's integral formula).
fn cauchy_coefficients(h: &dyn ScalarFunction, centre: C64, radius: f64, order: usize) -> Result<Vec<C64>> {
    let npts = (2 * order + 32).max(64);
    let mut values = Vec::with_capacity(npts);
    for j in 0..npts {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / npts as f64);
        let z = centre + w * radius;
        let v = h.eval(z).ok_or(Error::MatFunDomain { eigenvalue: z })?;
        values.push((w, v));
    }
    let mut out = Vec::with_capacity(order + 1);
    let mut rk = 1.0;
    for k in 0..=order {
        if k > 0 {
            rk *= radius;
        }
        let s: C64 = values.iter().map(|(w, v)| v * w.powi(-(k as i32))).sum();
        out.push(s / (npts as f64 * rk));
    }
    Ok(out)
}

/// Solves `A X - X B = C` for upper triangular `A`, `B` with disjoint spectra.
fn solve_triangular_sylvester(a: &DMatrix<C64>, b: &DMatrix<C64>, mut c: DMatrix<C64>) -> Result<DMatrix<C64>> {
    let m = a.nrows();
    let n = b.nrows();
    for col in 0..n {
        for r in 0..col {
            let coef = b[(r, col)];
            if coef != ZERO {
                for i in 0..m {
                    let add = c[(i, r)] * coef;
                    c[(i, col)] += add;
                }
            }
        }
        let shift = b[(col, col)];
        for i in (0..m).rev() {
            let mut acc = c[(i, col)];
            for k in i + 1..m {
                acc -= a[(i, k)] * c[(k, col)];
            }
            let d = a[(i, i)] - shift;
            if d.norm() == 0.0 {
                return Err(Error::Singular("coincident eigenvalues in distinct clusters".into()));
            }
            c[(i, col)] = acc / d;
        }
    }
    Ok(c)
}

/// Groups diagonal entries into clusters (transitive closure of closeness).
fn cluster_labels(t: &DMatrix<C64>, abs_tol: f64, rel_tol: f64) -> Vec<usize> {
    let n = t.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut k = i;
        while p[k] != r {
            let next = p[k];
            p[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let (li, lj) = (t[(i, i)], t[(j, j)]);
            let d = (li - lj).norm();
            if d <= abs_tol || d <= rel_tol * li.norm().max(lj.norm()) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    // relabel 0.. in order of first appearance
    let mut map = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if map[r] == usize::MAX {
                map[r] = next;
                next += 1;
            }
            map[r]
        })
        .collect()
}

/// Permutes the Schur form with unitary adjacent swaps so that equal labels
/// are contiguous; returns the block ranges.
fn reorder(t: &mut DMatrix<C64>, q: &mut Option<DMatrix<C64>>, mut labels: Vec<usize>) -> Vec<Range<usize>> {
    let n = labels.len();
    // bubble sort on labels (stable, only swaps across clusters)
    let mut swapped = true;
    while swapped {
        swapped = false;
        for k in 0..n.saturating_sub(1) {
            if labels[k] > labels[k + 1] {
                if q.is_none() {
                    *q = Some(DMatrix::identity(n, n));
                }
                swap_adjacent(t, q.as_mut().unwrap(), k);
                labels.swap(k, k + 1);
                swapped = true;
            }
        }
    }
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || labels[k] != labels[start] {
            blocks.push(start..k);
            start = k;
        }
    }
    blocks
}

fn swap_adjacent(t: &mut DMatrix<C64>, q: &mut DMatrix<C64>, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let c = t[(k, k + 1)];
    let x2 = b - a;
    let r = (c.norm_sqr() + x2.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (g11, g21) = (c / r, x2 / r);
    let (g12, g22) = (-g21.conj(), g11.conj());
    // T <- T G on columns k, k+1
    for i in 0..n {
        let (u, v) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = u * g11 + v * g21;
        t[(i, k + 1)] = u * g12 + v * g22;
    }
    // T <- G^H T on rows k, k+1
    for j in 0..n {
        let (u, v) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = g11.conj() * u + g21.conj() * v;
        t[(k + 1, j)] = g12.conj() * u + g22.conj() * v;
    }
    t[(k + 1, k)] = ZERO;
    for i in 0..n {
        let (u, v) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = u * g11 + v * g21;
        q[(i, k + 1)] = u * g12 + v * g22;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::mat_exp;

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn polynomial_on_jordan_block() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let sq = FnScalar(|z: C64| Some(z * z));
        let f = SchurParlett::new(&a).unwrap().apply(&sq).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(max_diff(&f, &want) < 1e-9, "{f}");
    }

    #[test]
    fn exp_matches_pade_on_dense_matrix() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[-2.0, 0.5, 0.3, 0.1, 0.2, -1.5, 0.4, 0.6, 0.0, 0.7, -3.0, 1.1, 0.9, 0.1, 0.2, -1.8],
        );
        let f = SchurParlett::new(&a).unwrap().apply(&Exp).unwrap();
        assert!(max_diff(&f, &mat_exp(&a).unwrap()) < 1e-12);
    }

    #[test]
    fn identity_function_returns_input() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.2, 0.3, -2.0, 0.1, 0.4, 0.4, -1.3]);
        let f = SchurParlett::new(&a).unwrap().apply(&FnScalar(Some)).unwrap();
        assert!(max_diff(&f, &a) < 1e-13);
    }

    #[test]
    fn reorders_interleaved_clusters() {
        // eigenvalues -1, -5, -1.0000001, -5.0000001 interleaved
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[-1.0, 1.0, 0.5, 0.2, 0.0, -5.0, 1.0, 0.3, 0.0, 0.0, -1.000_000_1, 1.0, 0.0, 0.0, 0.0, -5.000_000_1],
        );
        let sp = SchurParlett::new(&a).unwrap();
        assert_eq!(sp.blocks().len(), 2);
        let f = sp.apply(&Exp).unwrap();
        assert!(max_diff(&f, &mat_exp(&a).unwrap()) < 1e-12);
    }

    #[test]
    fn numeric_fallback_for_defective_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 2.0, 0.0, 0.0, -2.0, 2.0, 0.0, 0.0, -2.0]);
        let f = SchurParlett::new(&a)
            .unwrap()
            .apply(&FnScalar(|z: C64| Some(z.exp())))
            .unwrap();
        assert!(max_diff(&f, &mat_exp(&a).unwrap()) < 1e-10);
    }

    #[test]
    fn complex_spectrum_real_result() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -101.0, -103.0, -3.0]);
        let f = SchurParlett::new(&a).unwrap().apply(&Exp).unwrap();
        let e = mat_exp(&a).unwrap();
        assert!(max_diff(&f, &e) < 1e-9 * e.amax().max(1.0));
    }

    #[test]
    fn domain_error_names_eigenvalue() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        match SchurParlett::new(&a).unwrap().apply(&Log) {
            Err(Error::MatFunDomain { eigenvalue }) => assert_eq!(eigenvalue, C64::new(-1.0, 0.0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_of_erlang_generator() {
        // log(2I - 2N) = log(2) I - N - N^2/2
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -2.0, 0.0, 0.0, 2.0, -2.0, 0.0, 0.0, 2.0]);
        let l = SchurParlett::new(&a).unwrap().apply(&Log).unwrap();
        let ln2 = 2f64.ln();
        let want = DMatrix::from_row_slice(3, 3, &[ln2, -1.0, -0.5, 0.0, ln2, -1.0, 0.0, 0.0, ln2]);
        assert!(max_diff(&l, &want) < 1e-14);
    }
}
