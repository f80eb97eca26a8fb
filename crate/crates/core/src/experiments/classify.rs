use serde::{Deserialize, Serialize};

use super::toy::TraceLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    /// Number of final steps examined.
    pub window: usize,
    pub tol: f64,
    pub min_crossings: usize,
    pub min_amplitude: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            window: 500,
            tol: 0.02,
            min_crossings: 6,
            min_amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum StabilityVerdict {
    Converged { final_rate: f64, final_gap: f64 },
    Oscillating { crossings: usize, amplitude: f64 },
    Undetermined,
}

impl StabilityVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            StabilityVerdict::Converged { .. } => "converged",
            StabilityVerdict::Oscillating { .. } => "oscillating",
            StabilityVerdict::Undetermined => "undetermined",
        }
    }
}

/// Classifies a trace from its final `window` steps.
///
/// Converged when the rate spread and the mean `|c - theta|` both stay within
/// `tol`; oscillating when the rate crosses its trailing `window`-step mean at
/// least `min_crossings` times with a peak-to-trough amplitude of at least
/// `min_amplitude`.
pub fn classify_trace(trace: &TraceLog, cfg: &ClassifierConfig) -> Result<StabilityVerdict> {
    let rates: Vec<f64> = trace.steps.iter().map(|s| s.rate).collect();
    let thetas: Vec<f64> = trace.steps.iter().map(|s| s.theta).collect();
    classify_series(&rates, &thetas, cfg)
}

pub fn classify_series(
    rates: &[f64],
    thetas: &[f64],
    cfg: &ClassifierConfig,
) -> Result<StabilityVerdict> {
    let w = cfg.window;
    if w == 0 {
        return Err(Error::Config("classifier window must be positive".into()));
    }
    if rates.len() < 2 * w || thetas.len() != rates.len() {
        return Err(Error::TraceTooShort {
            needed: 2 * w,
            got: rates.len().min(thetas.len()),
        });
    }
    let n = rates.len();
    let tail = &rates[n - w..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        });
    let amplitude = hi - lo;
    let gap = tail
        .iter()
        .zip(&thetas[n - w..])
        .map(|(c, th)| (c - th).abs())
        .sum::<f64>()
        / w as f64;

    if amplitude <= cfg.tol && gap <= cfg.tol {
        return Ok(StabilityVerdict::Converged {
            final_rate: rates[n - 1],
            final_gap: gap,
        });
    }

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &c in rates {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + c);
    }
    let mut crossings = 0;
    let mut last_sign = 0i8;
    for k in n - w..n {
        let trailing = (prefix[k + 1] - prefix[k + 1 - w]) / w as f64;
        let d = rates[k] - trailing;
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                crossings += 1;
            }
            last_sign = sign;
        }
    }
    if crossings >= cfg.min_crossings && amplitude >= cfg.min_amplitude {
        return Ok(StabilityVerdict::Oscillating {
            crossings,
            amplitude,
        });
    }
    Ok(StabilityVerdict::Undetermined)
}
