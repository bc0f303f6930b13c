//! Oracles shared by the integration tests. Nothing here calls into the
//! library's numerical kernels.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 20-point Gauss-Legendre nodes and weights on [-1, 1], by Newton
/// iteration on `P_20`.
fn legendre_rule() -> Vec<(f64, f64)> {
    const N: usize = 20;
    let mut out = Vec::with_capacity(N);
    for i in 0..N {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=N {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn gl<F: Fn(f64) -> f64>(f: &F, rule: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Adaptive bisection with a 20-point Gauss-Legendre panel rule. A panel
/// is accepted when its halves agree with it to `tol` (absolute) or to
/// `1e-15` relative; at most 50 000 panels are split, 50 levels deep.
pub fn quad<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    struct Ctx<'a, F> {
        f: &'a F,
        rule: Vec<(f64, f64)>,
        budget: std::cell::Cell<u32>,
    }
    fn rec<F: Fn(f64) -> f64>(c: &Ctx<F>, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (gl(c.f, &c.rule, a, m), gl(c.f, &c.rule, m, b));
        let two = l + r;
        if depth == 0 || c.budget.get() == 0 || (two - whole).abs() <= tol.max(1e-15 * two.abs()) {
            return two;
        }
        c.budget.set(c.budget.get() - 1);
        rec(c, a, m, l, tol / 2.0, depth - 1) + rec(c, m, b, r, tol / 2.0, depth - 1)
    }
    let c = Ctx {
        f,
        rule: legendre_rule(),
        budget: std::cell::Cell::new(50_000),
    };
    let whole = gl(f, &c.rule, a, b);
    rec(&c, a, b, whole, tol, 50)
}

/// `∫_0^∞ f`, for integrands decaying at least exponentially beyond `scale`.
/// Integrates `[0, scale]` and then doubling panels until they stop
/// contributing.
pub fn half_line<F: Fn(f64) -> f64>(f: &F, scale: f64, tol: f64) -> f64 {
    let mut total = quad(f, 0.0, scale, tol);
    let (mut a, mut b) = (scale, 2.0 * scale);
    for _ in 0..60 {
        let piece = quad(f, a, b, tol);
        total += piece;
        if piece.abs() <= 1e-3 * tol && b > 50.0 * scale {
            break;
        }
        a = b;
        b *= 2.0;
    }
    total
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Erlang(n, λ) density.
pub fn erlang_pdf(n: usize, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if n == 1 && x == 0.0 { lambda } else { 0.0 };
    }
    lambda.powi(n as i32) * x.powi(n as i32 - 1) * (-lambda * x).exp() / factorial(n - 1)
}

/// Erlang(n, λ) survival function `e^{-λx} Σ_{k<n} (λx)^k / k!`.
pub fn erlang_sf(n: usize, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..n {
        term *= lambda * x / k as f64;
        sum += term;
    }
    (-lambda * x).exp() * sum
}

/// Hypoexponential density for distinct rates.
pub fn hypoexp_pdf(rates: &[f64], x: f64) -> f64 {
    let prod: f64 = rates.iter().product();
    rates
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let den: f64 = rates.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &lj)| lj - li).product();
            (-li * x).exp() / den
        })
        .sum::<f64>()
        * prod
}

/// Piecewise-constant sub-intensity path simulated by thinning. Returns
/// the fraction of paths still alive at `x`, split by state.
pub struct ThinningSim {
    /// `(start, matrix)` sorted by start; matrix `i` applies until start `i+1`.
    pub pieces: Vec<(f64, Vec<Vec<f64>>)>,
    pub pi: Vec<f64>,
}

impl ThinningSim {
    fn matrix_at(&self, u: f64) -> &Vec<Vec<f64>> {
        let mut m = &self.pieces[0].1;
        for (s, p) in &self.pieces {
            if u >= *s {
                m = p;
            }
        }
        m
    }

    /// Occupation counts at time `x` over `paths` simulated paths; the last
    /// entry counts absorbed paths.
    pub fn occupation(&self, x: f64, paths: usize, seed: u64) -> Vec<usize> {
        let p = self.pi.len();
        let bound = self
            .pieces
            .iter()
            .flat_map(|(_, m)| (0..p).map(move |i| -m[i][i]))
            .fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0usize; p + 1];
        for _ in 0..paths {
            let mut state = pick(&mut rng, &self.pi);
            let mut u = 0.0;
            loop {
                u += -(1.0 - rng.random::<f64>()).ln() / bound;
                if u > x {
                    counts[state] += 1;
                    break;
                }
                let m = self.matrix_at(u);
                let r = rng.random::<f64>() * bound;
                let mut acc = 0.0;
                let mut next = None;
                for (j, &rate) in m[state].iter().enumerate() {
                    if j != state {
                        acc += rate;
                        if r < acc {
                            next = Some(j);
                            break;
                        }
                    }
                }
                match next {
                    Some(j) => state = j,
                    None => {
                        let exit: f64 = -m[state].iter().sum::<f64>();
                        if r < acc + exit {
                            counts[p] += 1;
                            break;
                        }
                    }
                }
            }
        }
        counts
    }
}

fn pick<R: Rng>(rng: &mut R, w: &[f64]) -> usize {
    let r = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, v) in w.iter().enumerate() {
        acc += v;
        if r < acc {
            return i;
        }
    }
    w.len() - 1
}

/// `|a - b| <= rel |b| + abs`
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * b.abs() + abs
}
