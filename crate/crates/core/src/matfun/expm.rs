//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13, chosen from the 1-norm.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub(crate) fn check_square_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Returns `e^A`.
pub fn mat_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(a)?;
    let n = a.nrows();
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, a[(0, 0)].exp()));
    }
    // Trace shift: e^A = e^mu e^(A - mu I). Keeps the norm small for
    // matrices dominated by their diagonal, as sub-intensity matrices are.
    let mu = a.trace() / n as f64;
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= mu;
    }
    let (use_shift, base) = if one_norm(&shifted) < one_norm(a) {
        (true, shifted)
    } else {
        (false, a.clone())
    };
    let mut out = exp_unshifted(&base)?;
    if use_shift {
        let scale = mu.exp();
        out *= scale;
        if out.iter().any(|v| !v.is_finite()) {
            out = exp_unshifted(a)?;
        }
    }
    Ok(out)
}

fn exp_unshifted(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let norm = one_norm(a);
    let eye = DMatrix::<f64>::identity(n, n);
    for &(m, theta) in THETA.iter().take(4) {
        if norm <= theta {
            return pade_low(a, m, &eye);
        }
    }
    let theta13 = THETA[4].1;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-s);
    let mut r = pade13(&scaled, &eye)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = &v + &u;
    let q = &v - &u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Singular("Padé denominator in matrix exponential".into()))
}

fn pade_low(a: &DMatrix<f64>, m: usize, eye: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b: &[f64] = match m {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let a2 = a * a;
    let mut powers = vec![eye.clone(), a2.clone()];
    for k in 2..=m / 2 {
        let next = &powers[k - 1] * &a2;
        powers.push(next);
    }
    let mut odd = DMatrix::zeros(a.nrows(), a.ncols());
    let mut even = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, pk) in powers.iter().enumerate() {
        odd += pk * b[2 * k + 1];
        even += pk * b[2 * k];
    }
    pade_solve(a * odd, even)
}

fn pade13(a: &DMatrix<f64>, eye: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let w2 = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + eye * b[1];
    let u = a * (&a6 * w1 + w2);
    let z1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let z2 = &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + eye * b[0];
    let v = &a6 * z1 + z2;
    pade_solve(u, v)
}
