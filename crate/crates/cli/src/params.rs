//! The `iph-params/1` parameter document.
//!
//! JSON with every real written to 17 significant digits, so that reading
//! a document back reproduces the fitted model bit for bit.

use std::io;

use iph::families::{Transform, TransformedPH};
use iph::phcore::PHDist;
use nalgebra::DMatrix;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = "iph-params/1";

/// Fit summary stored alongside the model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub iterations: usize,
    pub converged: bool,
    pub loglik_transformed: f64,
    pub loglik_original: f64,
    pub n_obs: usize,
}

/// Pretty JSON with reals as `d.dddddddddddddddde±x`.
struct Sci17<'a>(PrettyFormatter<'a>);

impl Formatter for Sci17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn transform_value(t: Transform) -> Value {
    match t {
        Transform::ParetoExp { beta } => json!({ "family": "pareto", "beta": beta }),
        Transform::Power { beta } => json!({ "family": "weibull", "beta": beta }),
        Transform::NegLogAffine { mu, sigma } => json!({ "family": "gumbel", "mu": mu, "sigma": sigma }),
        Transform::ShiftedPower { mu, sigma, xi } => {
            json!({ "family": "gev", "mu": mu, "sigma": sigma, "xi": xi })
        }
    }
}

/// Serialises a model (and optional fit summary) to the document text.
pub fn to_document(model: &TransformedPH, fit: Option<&FitSummary>) -> String {
    let base = model.base();
    let p = base.dim();
    let t: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| base.t()[(i, j)]).collect()).collect();
    let mut doc = Map::new();
    doc.insert("version".into(), json!(VERSION));
    doc.insert("transform".into(), transform_value(model.transform()));
    doc.insert("scale_reference".into(), json!(model.mu()));
    doc.insert("shift".into(), json!(model.shift()));
    doc.insert("pi".into(), json!(base.pi().iter().collect::<Vec<_>>()));
    doc.insert("t".into(), json!(t));
    if let Some(f) = fit {
        doc.insert(
            "fit".into(),
            json!({
                "phases": p,
                "observations": f.n_obs,
                "iterations": f.iterations,
                "converged": f.converged,
                "loglik_transformed": f.loglik_transformed,
                "loglik_original": f.loglik_original,
            }),
        );
    }
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17(PrettyFormatter::with_indent(b"  ")));
    serde::Serialize::serialize(&Value::Object(doc), &mut ser).expect("writing to memory");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> CliResult<&'a Value> {
    v.get(key).ok_or_else(|| CliError::config(format!("params: missing field {path}.{key}")))
}

fn real(v: &Value, path: &str) -> CliResult<f64> {
    v.as_f64().ok_or_else(|| CliError::config(format!("params: {path} must be a number")))
}

fn real_field(v: &Value, key: &str, path: &str) -> CliResult<f64> {
    real(field(v, key, path)?, &format!("{path}.{key}"))
}

fn reals(v: &Value, path: &str) -> CliResult<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| CliError::config(format!("params: {path} must be an array")))?;
    arr.iter().enumerate().map(|(i, x)| real(x, &format!("{path}[{i}]"))).collect()
}

/// Parses a document and rebuilds the model. Schema problems are reported
/// with the path of the offending field.
pub fn from_document(text: &str) -> CliResult<(TransformedPH, Option<FitSummary>)> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("params: {e}")))?;
    let version = field(&doc, "version", "$")?.as_str().unwrap_or_default();
    if version != VERSION {
        return Err(CliError::config(format!("params: $.version is '{version}', expected '{VERSION}'")));
    }
    let tr = field(&doc, "transform", "$")?;
    let path = "$.transform";
    let family = field(tr, "family", path)?.as_str().unwrap_or_default();
    let transform = match family {
        "pareto" => Transform::ParetoExp {
            beta: real_field(tr, "beta", path)?,
        },
        "weibull" => Transform::Power {
            beta: real_field(tr, "beta", path)?,
        },
        "gumbel" => Transform::NegLogAffine {
            mu: real_field(tr, "mu", path)?,
            sigma: real_field(tr, "sigma", path)?,
        },
        "gev" => Transform::ShiftedPower {
            mu: real_field(tr, "mu", path)?,
            sigma: real_field(tr, "sigma", path)?,
            xi: real_field(tr, "xi", path)?,
        },
        other => return Err(CliError::config(format!("params: $.transform.family '{other}' is unknown"))),
    };
    let mu = real_field(&doc, "scale_reference", "$")?;
    let shift = real_field(&doc, "shift", "$")?;
    let pi = reals(field(&doc, "pi", "$")?, "$.pi")?;
    let rows = field(&doc, "t", "$")?
        .as_array()
        .ok_or_else(|| CliError::config("params: $.t must be an array of rows"))?;
    let p = pi.len();
    if rows.len() != p {
        return Err(CliError::config(format!("params: $.t has {} rows, $.pi has {p} entries", rows.len())));
    }
    let mut t = DMatrix::zeros(p, p);
    for (i, row) in rows.iter().enumerate() {
        let r = reals(row, &format!("$.t[{i}]"))?;
        if r.len() != p {
            return Err(CliError::config(format!("params: $.t[{i}] has {} entries, expected {p}", r.len())));
        }
        for (j, v) in r.into_iter().enumerate() {
            t[(i, j)] = v;
        }
    }
    let base = PHDist::new(pi, t, true).map_err(|e| CliError::config(format!("params: $.t / $.pi: {e}")))?;
    let model = TransformedPH::from_parts(base, transform, mu, shift)
        .map_err(|e| CliError::config(format!("params: $.transform: {e}")))?;
    let fit = match doc.get("fit") {
        None => None,
        Some(f) => Some(FitSummary {
            iterations: field(f, "iterations", "$.fit")?.as_u64().unwrap_or(0) as usize,
            converged: field(f, "converged", "$.fit")?.as_bool().unwrap_or(false),
            loglik_transformed: real_field(f, "loglik_transformed", "$.fit").unwrap_or(f64::NAN),
            loglik_original: real_field(f, "loglik_original", "$.fit").unwrap_or(f64::NAN),
            n_obs: field(f, "observations", "$.fit")?.as_u64().unwrap_or(0) as usize,
        }),
    };
    Ok((model, fit))
}
