//! Fit options from flags and an optional TOML file, resolved into a
//! validated [`RunConfig`]. Flags take precedence over the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use iph::families::Transform;
use iph::Parallelism;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Shift applied on the base scale: a fixed value or chosen from the data.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ShiftSpec {
    Value(f64),
    #[serde(deserialize_with = "auto_keyword")]
    Auto,
}

fn auto_keyword<'de, D: serde::Deserializer<'de>>(d: D) -> Result<(), D::Error> {
    let s = String::deserialize(d)?;
    if s == "auto" {
        Ok(())
    } else {
        Err(serde::de::Error::custom(format!("expected a number or \"auto\", got \"{s}\"")))
    }
}

impl FromStr for ShiftSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(ShiftSpec::Auto);
        }
        s.parse()
            .map(ShiftSpec::Value)
            .map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

/// Raw options as typed by the user. Every field is optional so that a
/// config file and the command line can be layered.
#[derive(Debug, Clone, Default, Deserialize, clap::Args)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitOptions {
    /// CSV file with one observation per row
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// 0-based column holding the observations [default: 0]
    #[arg(long)]
    pub column: Option<usize>,
    /// Leading rows to skip [default: 0]
    #[arg(long)]
    pub header_rows: Option<usize>,
    /// Transform family: pareto, weibull, gumbel or gev [default: pareto]
    #[arg(long)]
    pub transform: Option<String>,
    /// Pareto: ratio β/μ [default: 1]. Weibull: shape β (required)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gumbel/GEV scale [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Gumbel/GEV location [default: 0]
    #[arg(long)]
    pub mu: Option<f64>,
    /// GEV shape, nonzero (required for gev)
    #[arg(long)]
    pub xi: Option<f64>,
    /// Shift subtracted on the base scale, or "auto" [default: 0]
    #[arg(long)]
    pub shift: Option<ShiftSpec>,
    /// Number of phases [default: 1]
    #[arg(long)]
    pub phases: Option<usize>,
    /// Seed for the random EM start [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// EM iteration cap [default: 2000]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Also fit an Erlang law with this many phases as a baseline
    #[arg(long)]
    pub erlang_baseline: Option<usize>,
    /// Directory receiving the output files
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Combine parallel work in a fixed order (bit-reproducible)
    #[arg(long)]
    #[serde(default)]
    pub deterministic: bool,
    /// EM start: random or structured [default: random]
    #[arg(long)]
    pub init: Option<String>,
    /// Points on the density grid [default: 512]
    #[arg(long)]
    pub grid_points: Option<usize>,
}

impl FitOptions {
    /// Reads options from a TOML file using the flag names as keys.
    pub fn from_toml_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }

    /// Fills every unset field of `self` from `lower`.
    pub fn over(self, lower: FitOptions) -> FitOptions {
        FitOptions {
            input: self.input.or(lower.input),
            column: self.column.or(lower.column),
            header_rows: self.header_rows.or(lower.header_rows),
            transform: self.transform.or(lower.transform),
            beta: self.beta.or(lower.beta),
            sigma: self.sigma.or(lower.sigma),
            mu: self.mu.or(lower.mu),
            xi: self.xi.or(lower.xi),
            shift: self.shift.or(lower.shift),
            phases: self.phases.or(lower.phases),
            seed: self.seed.or(lower.seed),
            max_iters: self.max_iters.or(lower.max_iters),
            erlang_baseline: self.erlang_baseline.or(lower.erlang_baseline),
            out_dir: self.out_dir.or(lower.out_dir),
            deterministic: self.deterministic || lower.deterministic,
            init: self.init.or(lower.init),
            grid_points: self.grid_points.or(lower.grid_points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Random,
    Structured,
}

/// Validated fit settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub column: usize,
    pub header_rows: usize,
    /// For `ParetoExp`, `beta` holds the ratio β/μ.
    pub transform: Transform,
    pub shift: ShiftSpec,
    pub phases: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub erlang_baseline: Option<usize>,
    pub out_dir: PathBuf,
    pub mode: Parallelism,
    pub init: InitKind,
    pub grid_points: usize,
}

fn unused(name: &str, value: Option<f64>, family: &str) -> CliResult<()> {
    match value {
        Some(_) => Err(CliError::config(format!("--{name} does not apply to the {family} transform"))),
        None => Ok(()),
    }
}

fn transform_from(o: &FitOptions) -> CliResult<Transform> {
    let family = o.transform.as_deref().unwrap_or("pareto");
    let t = match family {
        "pareto" => {
            unused("sigma", o.sigma, family)?;
            unused("mu", o.mu, family)?;
            unused("xi", o.xi, family)?;
            Transform::ParetoExp {
                beta: o.beta.unwrap_or(1.0),
            }
        }
        "weibull" => {
            unused("sigma", o.sigma, family)?;
            unused("mu", o.mu, family)?;
            unused("xi", o.xi, family)?;
            let beta = o
                .beta
                .ok_or_else(|| CliError::config("the weibull transform needs --beta"))?;
            Transform::Power { beta }
        }
        "gumbel" => {
            unused("beta", o.beta, family)?;
            unused("xi", o.xi, family)?;
            Transform::NegLogAffine {
                mu: o.mu.unwrap_or(0.0),
                sigma: o.sigma.unwrap_or(1.0),
            }
        }
        "gev" => {
            unused("beta", o.beta, family)?;
            let xi = o.xi.ok_or_else(|| CliError::config("the gev transform needs --xi"))?;
            Transform::ShiftedPower {
                mu: o.mu.unwrap_or(0.0),
                sigma: o.sigma.unwrap_or(1.0),
                xi,
            }
        }
        other => {
            return Err(CliError::config(format!(
                "unknown transform '{other}' (expected pareto, weibull, gumbel or gev)"
            )))
        }
    };
    t.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(t)
}

impl RunConfig {
    /// Checks every setting without touching the file system.
    pub fn resolve(o: FitOptions) -> CliResult<Self> {
        let transform = transform_from(&o)?;
        let input = o.input.clone().ok_or_else(|| CliError::config("--input is required"))?;
        let out_dir = o.out_dir.clone().ok_or_else(|| CliError::config("--out-dir is required"))?;
        if input.as_os_str().is_empty() || out_dir.as_os_str().is_empty() {
            return Err(CliError::config("paths must be nonempty"));
        }
        let phases = o.phases.unwrap_or(1);
        if phases == 0 {
            return Err(CliError::config("phases must be at least 1"));
        }
        let max_iters = o.max_iters.unwrap_or(2000);
        if max_iters == 0 {
            return Err(CliError::config("max-iters must be at least 1"));
        }
        let grid_points = o.grid_points.unwrap_or(512);
        if grid_points < 2 {
            return Err(CliError::config("grid-points must be at least 2"));
        }
        if o.erlang_baseline == Some(0) {
            return Err(CliError::config("erlang-baseline must be at least 1"));
        }
        let shift = o.shift.unwrap_or(ShiftSpec::Value(0.0));
        if let ShiftSpec::Value(s) = shift {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(CliError::config(format!("shift must be finite and nonnegative, got {s}")));
            }
        }
        let init = match o.init.as_deref().unwrap_or("random") {
            "random" => InitKind::Random,
            "structured" => InitKind::Structured,
            other => return Err(CliError::config(format!("unknown init '{other}' (expected random or structured)"))),
        };
        Ok(RunConfig {
            input,
            column: o.column.unwrap_or(0),
            header_rows: o.header_rows.unwrap_or(0),
            transform,
            shift,
            phases,
            seed: o.seed.unwrap_or(0),
            max_iters,
            erlang_baseline: o.erlang_baseline,
            out_dir,
            mode: if o.deterministic {
                Parallelism::Deterministic
            } else {
                Parallelism::Unordered
            },
            init,
            grid_points,
        })
    }
}
