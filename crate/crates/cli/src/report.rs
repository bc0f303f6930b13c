//! The `fit` workflow: ingest, shift, fit, and write the report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use iph::emfit::{fit_erlang_rate, fit_transformed, FitConfig, FitInit};
use iph::families::TransformedPH;

use crate::config::{InitKind, RunConfig, ShiftSpec};
use crate::data::{auto_shift, ingest_csv};
use crate::error::{CliError, CliResult};
use crate::params::{to_document, FitSummary};

pub const PARAMS_FILE: &str = "params.json";
pub const LOGLIK_FILE: &str = "loglik.csv";
pub const DENSITY_FILE: &str = "density.csv";
pub const QQ_FILE: &str = "qq.csv";
pub const HIST_FILE: &str = "hist.csv";

/// Erlang baseline fitted to the same base-scale data.
#[derive(Debug, Clone, PartialEq)]
pub struct ErlangBaseline {
    pub phases: usize,
    pub rate: f64,
    pub loglik_transformed: f64,
    pub loglik_original: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: TransformedPH,
    pub summary: FitSummary,
    pub shift: f64,
    pub baseline: Option<ErlangBaseline>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Files written so far; removed again unless the run completes.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn open(dir: &Path) -> CliResult<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            done: false,
        })
    }

    fn write(&mut self, name: &str, content: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, content).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs the whole fit. `cfg` is assumed valid (see [`RunConfig::resolve`]).
pub fn run_fit(cfg: &RunConfig) -> CliResult<FitReport> {
    let data = ingest_csv(&cfg.input, cfg.column, cfg.header_rows)?;
    let mut warnings = Vec::new();

    let shift = match cfg.shift {
        ShiftSpec::Value(s) => s,
        ShiftSpec::Auto => {
            let base: Vec<f64> = data.iter().map(|&y| cfg.transform.g_inv(y, 1.0)).collect();
            auto_shift(&base)
        }
    };
    let fit_cfg = FitConfig {
        phases: cfg.phases,
        max_iters: cfg.max_iters,
        init: match cfg.init {
            InitKind::Random => FitInit::Random(cfg.seed),
            InitKind::Structured => FitInit::Structured,
        },
        mode: cfg.mode,
        ..FitConfig::default()
    };
    let (model, fit) = fit_transformed(&data, cfg.transform, shift, &fit_cfg)?;
    warnings.extend(fit.warnings.iter().cloned());
    if !fit.converged {
        warnings.push(format!("EM stopped at the iteration cap ({}) before converging", cfg.max_iters));
    }
    let summary = FitSummary {
        iterations: fit.iterations_run,
        converged: fit.converged,
        loglik_transformed: fit.loglik(),
        loglik_original: fit.original_loglik.unwrap_or(f64::NAN),
        n_obs: data.len(),
    };

    let xs: Vec<f64> = data.iter().map(|&y| model.to_base(y)).collect();
    let jac: f64 = data
        .iter()
        .map(|&y| model.transform().g_inv_jacobian(y, model.mu()).ln())
        .sum();
    let baseline = match cfg.erlang_baseline {
        None => None,
        Some(n) => {
            let (rate, ll) = fit_erlang_rate(&xs, n)?;
            Some(ErlangBaseline {
                phases: n,
                rate,
                loglik_transformed: ll,
                loglik_original: ll + jac,
            })
        }
    };

    let mut out = Outputs::open(&cfg.out_dir)?;
    out.write(PARAMS_FILE, &to_document(&model, Some(&summary)))?;
    out.write(LOGLIK_FILE, &loglik_table(cfg.phases, &summary, baseline.as_ref()))?;
    out.write(DENSITY_FILE, &density_grid(&model, &data, cfg.grid_points)?)?;
    out.write(QQ_FILE, &qq_table(&model, &data)?)?;
    out.write(HIST_FILE, &histogram(&model, &xs)?)?;
    out.done = true;
    let files = std::mem::take(&mut out.written);

    Ok(FitReport {
        model,
        summary,
        shift,
        baseline,
        warnings,
        files,
    })
}

fn loglik_table(phases: usize, s: &FitSummary, baseline: Option<&ErlangBaseline>) -> String {
    let mut t = String::from("model,phases,loglik_transformed,loglik_original\n");
    let _ = writeln!(t, "ph,{phases},{},{}", sci(s.loglik_transformed), sci(s.loglik_original));
    if let Some(b) = baseline {
        let _ = writeln!(
            t,
            "erlang,{},{},{}",
            b.phases,
            sci(b.loglik_transformed),
            sci(b.loglik_original)
        );
    }
    t
}

/// Fitted pdf and sf over the data range; log-spaced when the range spans
/// more than two decades.
fn density_grid(model: &TransformedPH, data: &[f64], points: usize) -> CliResult<String> {
    let mut lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo *= 0.5;
        hi *= 1.5;
    }
    let log_scale = hi / lo > 100.0;
    let mut t = String::from("y,pdf,sf\n");
    for k in 0..points {
        let f = k as f64 / (points - 1) as f64;
        let y = if log_scale {
            (lo.ln() + f * (hi / lo).ln()).exp()
        } else {
            lo + f * (hi - lo)
        };
        let _ = writeln!(t, "{},{},{}", sci(y), sci(model.pdf(y)?), sci(model.sf(y)?));
    }
    Ok(t)
}

/// Order statistics against model quantiles at `i / (N + 1)`.
fn qq_table(model: &TransformedPH, data: &[f64]) -> CliResult<String> {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut t = String::from("p,empirical,model\n");
    let mut last = f64::NEG_INFINITY;
    for (i, y) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / (n + 1.0);
        // bisection noise must not break the ordering of the model column
        let q = model.quantile(p)?.max(last);
        last = q;
        let _ = writeln!(t, "{},{},{}", sci(p), sci(*y), sci(q));
    }
    Ok(t)
}

/// Histogram of the base-scale data with the fitted base density at the
/// bin midpoints.
fn histogram(model: &TransformedPH, xs: &[f64]) -> CliResult<String> {
    let n = xs.len();
    let bins = ((n as f64).sqrt().ceil() as usize).clamp(5, 100);
    let hi = xs.iter().copied().fold(0.0, f64::max);
    let width = hi / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let b = ((x / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut t = String::from("bin_lo,bin_hi,count,density,fitted_density\n");
    for (b, &c) in counts.iter().enumerate() {
        let a = b as f64 * width;
        let fitted = model.base().pdf(a + 0.5 * width)?;
        let _ = writeln!(
            t,
            "{},{},{c},{},{}",
            sci(a),
            sci(a + width),
            sci(c as f64 / (n as f64 * width)),
            sci(fitted)
        );
    }
    Ok(t)
}
