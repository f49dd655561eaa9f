//! Chain diagnostics and posterior summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_TRACE_LEN: usize = 100;

/// `1 + 2 sum rho_s`, summing lags before the first one with `rho_s < 2/sqrt(n)`,
/// at most `n/50` lags.
pub fn inefficiency_factor(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < MIN_TRACE_LEN {
        return Err(Error::TooShortTrace { len: n, min: MIN_TRACE_LEN });
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>();
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::DegenerateTrace);
    }
    let threshold = 2.0 / (n as f64).sqrt();
    let cap = (n / 50).max(1);
    let mut sum = 0.0;
    for s in 1..=cap {
        let cs: f64 = dev[..n - s].iter().zip(&dev[s..]).map(|(a, b)| a * b).sum();
        let rho = cs / c0;
        if rho < threshold {
            break;
        }
        sum += rho;
    }
    Ok((1.0 + 2.0 * sum).max(0.0))
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n-1) prob`).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    pub prob_positive: f64,
    /// `None` when the trace is too short or constant.
    pub inefficiency: Option<f64>,
}

pub fn posterior_summary(trace: &[f64]) -> Result<PosteriorSummary> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = trace.len() as f64;
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(PosteriorSummary {
        mean: trace.iter().sum::<f64>() / n,
        q025: quantile(&sorted, 0.025),
        q975: quantile(&sorted, 0.975),
        prob_positive: trace.iter().filter(|&&x| x > 0.0).count() as f64 / n,
        inefficiency: inefficiency_factor(trace).ok(),
    })
}

/// Equal-tailed credible interval with coverage `level`.
pub fn credible_interval(trace: &[f64], level: f64) -> Result<(f64, f64)> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let tail = 0.5 * (1.0 - level);
    Ok((quantile(&sorted, tail), quantile(&sorted, 1.0 - tail)))
}
