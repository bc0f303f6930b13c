//! One-sample Kolmogorov-Smirnov goodness-of-fit statistic.

/// `sup_x |F_n(x) - F(x)|` for the sample against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let lo = f - i as f64 / n;
        let hi = (i + 1) as f64 / n - f;
        d.max(lo).max(hi)
    })
}

/// Asymptotic critical value at significance `alpha`, with Stephens'
/// finite-sample correction.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let rn = (n as f64).sqrt();
    c / (rn + 0.12 + 0.11 / rn)
}

/// Outcome of a KS test.
#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
}

impl KsOutcome {
    pub fn passed(&self) -> bool {
        self.statistic <= self.critical
    }
}

pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F, alpha: f64) -> KsOutcome {
    KsOutcome {
        statistic: ks_statistic(sample, cdf),
        critical: ks_critical_value(sample.len(), alpha),
    }
}
