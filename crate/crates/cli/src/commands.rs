//! The `eval`, `sample` and `oracle-check` verbs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use iph::families::{erlang_oracle, ErlangFamily, Moment, Transform, TransformedPH};
use iph::phcore::{erlang_rep, ErlangSpec, PHDist};
use iph::Parallelism;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};
use crate::params::from_document;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Query {
    Pdf,
    Sf,
    Cdf,
    Quantile,
    Mean,
}

pub fn load_model(path: &Path) -> CliResult<TransformedPH> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read params {}: {e}", path.display())))?;
    Ok(from_document(&text)?.0)
}

/// Evaluates `query` and formats the result at full precision. A divergent
/// mean is reported as `infinite`.
pub fn eval(model: &TransformedPH, query: Query, arg: Option<f64>) -> CliResult<String> {
    let need = || arg.ok_or_else(|| CliError::config("this query needs a numeric argument"));
    let v = match query {
        Query::Pdf => model.pdf(need()?)?,
        Query::Sf => model.sf(need()?)?,
        Query::Cdf => model.cdf(need()?)?,
        Query::Quantile => {
            let p = need()?;
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::config(format!("quantile level must lie in [0, 1], got {p}")));
            }
            model.quantile(p)?
        }
        Query::Mean => {
            if arg.is_some() {
                return Err(CliError::config("the mean query takes no argument"));
            }
            match model.mean()? {
                Moment::Finite(m) => m,
                Moment::Infinite => return Ok("infinite".to_string()),
            }
        }
    };
    Ok(format!("{v:.16e}"))
}

/// Draws `count` values with a seeded stream, one per line.
pub fn sample(model: &TransformedPH, count: usize, seed: u64, mode: Parallelism) -> CliResult<String> {
    if count == 0 {
        return Err(CliError::config("count must be at least 1"));
    }
    let xs = model.sample_seeded(seed, count, mode)?;
    let mut out = String::with_capacity(24 * count);
    for x in xs {
        let _ = writeln!(out, "{x:.16e}");
    }
    Ok(out)
}

/// Outcome of [`oracle_check`]: one line per check and the overall verdict.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub lines: Vec<String>,
    pub passed: bool,
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// Compares the matrix evaluation path against closed-form densities: the
/// four families over Erlang bases, and the non-phase-type matrix-exponential
/// example whose log-transform density is an explicit trigonometric form.
pub fn oracle_check() -> CliResult<OracleReport> {
    const TOL: f64 = 1e-10;
    let cases = [
        ("pareto", ErlangFamily::Pareto, None),
        ("weibull", ErlangFamily::Weibull { beta: 1.5 }, Some(Transform::Power { beta: 1.5 })),
        (
            "gumbel",
            ErlangFamily::Gumbel { mu: 0.5, sigma: 2.0 },
            Some(Transform::NegLogAffine { mu: 0.5, sigma: 2.0 }),
        ),
        (
            "gev",
            ErlangFamily::Gev { mu: 0.0, sigma: 1.0, xi: 0.25 },
            Some(Transform::ShiftedPower { mu: 0.0, sigma: 1.0, xi: 0.25 }),
        ),
    ];
    let mut lines = Vec::new();
    let mut passed = true;
    for (name, fam, tr) in cases {
        let mut worst: f64 = 0.0;
        for n in 1..=5 {
            for lambda in [0.5, 1.0, 3.0] {
                let base = erlang_rep(ErlangSpec { n, lambda })?;
                let d = match tr {
                    None => TransformedPH::log_ph(base)?,
                    Some(t) => TransformedPH::new(base, t)?,
                };
                for k in 1..100 {
                    let y = d.quantile(k as f64 / 100.0)?;
                    let want = erlang_oracle(fam, n, lambda, y)?;
                    worst = worst.max(rel_err(d.pdf(y)?, want));
                }
            }
        }
        let ok = worst <= TOL;
        passed &= ok;
        lines.push(format!(
            "{} erlang-{name}: max relative error {worst:.3e}",
            if ok { "ok  " } else { "FAIL" }
        ));
    }

    let t = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -101.0, -103.0, -3.0]);
    let base = PHDist::matrix_exponential(vec![101.0, 0.0, 0.0], t, vec![0.0, 0.0, 1.0])?;
    let d = TransformedPH::from_parts(base, Transform::ParetoExp { beta: 1.0 }, 1.0, 0.0)?;
    let mut worst: f64 = 0.0;
    for k in 0..=400 {
        let y = 0.05 * k as f64;
        let l = y.ln_1p();
        let want = 1.01 * (1.0 + y).powi(-2) * (1.0 - (10.0 * l).cos());
        if want > 1e-6 {
            worst = worst.max(rel_err(d.pdf(y)?, want));
        }
    }
    let ok = worst <= 1e-8;
    passed &= ok;
    lines.push(format!(
        "{} matrix-exponential example: max relative error {worst:.3e}",
        if ok { "ok  " } else { "FAIL" }
    ));
    Ok(OracleReport { lines, passed })
}
