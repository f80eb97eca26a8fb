//! Homeostasis metrics over per-trial firing rates.
//!
//! Two formulations are provided. The legacy one summarises each condition
//! separately (mean and spread of rates per trial, then across trials) and
//! compares the summaries; it cannot see neurons that merely swap rates. The
//! HM metrics first take the per-neuron, per-trial absolute difference
//! between paired base and degraded trials and then summarise those
//! differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean_std;

pub const BASE_CONDITION: &str = "base";

/// Firing rates of every tracked neuron during one trial, flattened across
/// layers in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub condition: String,
    pub duration: u64,
    pub rates: Vec<f64>,
}

impl TrialRecord {
    pub fn new(
        trial: usize,
        condition: impl Into<String>,
        duration: u64,
        rates: Vec<f64>,
    ) -> Result<Self> {
        if let Some((i, r)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(0.0..=1.0).contains(*r))
        {
            return Err(Error::Validation(format!(
                "rate {r} of neuron {i} is outside [0, 1]"
            )));
        }
        Ok(Self {
            trial,
            condition: condition.into(),
            duration,
            rates,
        })
    }

    pub fn with_trial(mut self, trial: usize) -> Self {
        self.trial = trial;
        self
    }

    pub fn with_condition(mut self, condition: impl Into<String>) -> Self {
        self.condition = condition.into();
        self
    }
}

/// Converts spike counts over a trial of `duration` steps into a record
/// (trial 0, base condition).
pub fn firing_rates(counts: &[u64], duration: u64) -> Result<TrialRecord> {
    if duration == 0 {
        return Err(Error::EmptyTrial);
    }
    if let Some((i, &c)) = counts.iter().enumerate().find(|(_, &c)| c > duration) {
        return Err(Error::Validation(format!(
            "neuron {i} has {c} spikes in a {duration}-step trial"
        )));
    }
    let t = duration as f64;
    TrialRecord::new(
        0,
        BASE_CONDITION,
        duration,
        counts.iter().map(|&c| c as f64 / t).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmMetrics {
    pub hm_m: f64,
    pub hm_std: f64,
}

/// Mean and population standard deviation of `|f_base - f_degraded|` over
/// every (neuron, trial) pair. Trials are paired by position.
pub fn hm_metrics(base: &[TrialRecord], degraded: &[TrialRecord]) -> Result<HmMetrics> {
    if base.len() != degraded.len() {
        return Err(Error::Pairing(format!(
            "{} base trials cannot pair with {} degraded trials",
            base.len(),
            degraded.len()
        )));
    }
    let mut diffs = Vec::new();
    for (b, d) in base.iter().zip(degraded) {
        if b.trial != d.trial {
            return Err(Error::Pairing(format!(
                "base trial {} paired with degraded trial {}",
                b.trial, d.trial
            )));
        }
        if b.rates.len() != d.rates.len() {
            return Err(Error::Pairing(format!(
                "trial {}: {} base neurons vs {} degraded neurons",
                b.trial,
                b.rates.len(),
                d.rates.len()
            )));
        }
        diffs.extend(b.rates.iter().zip(&d.rates).map(|(x, y)| (x - y).abs()));
    }
    let (hm_m, hm_std) = mean_std(&diffs);
    Ok(HmMetrics { hm_m, hm_std })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyMetrics {
    pub fr_m: f64,
    pub fr_std_m: f64,
    pub fr_std_s: f64,
}

impl LegacyMetrics {
    /// Component-wise `self - other`.
    pub fn delta(&self, other: &LegacyMetrics) -> LegacyMetrics {
        LegacyMetrics {
            fr_m: self.fr_m - other.fr_m,
            fr_std_m: self.fr_std_m - other.fr_std_m,
            fr_std_s: self.fr_std_s - other.fr_std_s,
        }
    }
}

/// Per-trial mean and standard deviation of all rates, then the mean of the
/// means, the mean of the standard deviations and the standard deviation of
/// the standard deviations.
pub fn legacy_fr_metrics(trials: &[TrialRecord]) -> Result<LegacyMetrics> {
    if trials.is_empty() {
        return Err(Error::EmptyTrial);
    }
    let (means, stds): (Vec<f64>, Vec<f64>) = trials.iter().map(|t| mean_std(&t.rates)).unzip();
    let (fr_m, _) = mean_std(&means);
    let (fr_std_m, fr_std_s) = mean_std(&stds);
    Ok(LegacyMetrics {
        fr_m,
        fr_std_m,
        fr_std_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub condition: String,
    pub hm_m: f64,
    pub hm_std: f64,
    pub legacy_base: LegacyMetrics,
    pub legacy_degraded: LegacyMetrics,
    /// Degraded minus base.
    pub legacy_delta: LegacyMetrics,
}

/// All conditions evaluated for one adapter configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub adapter: String,
    pub conditions: Vec<ConditionMetrics>,
}

impl MetricsReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionMetrics> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

/// Scores each degraded condition against `base`.
pub fn build_report(
    adapter: &str,
    base: &[TrialRecord],
    conditions: &[(String, Vec<TrialRecord>)],
) -> Result<MetricsReport> {
    let legacy_base = legacy_fr_metrics(base)?;
    let conditions = conditions
        .iter()
        .map(|(name, trials)| {
            let hm = hm_metrics(base, trials)?;
            let legacy_degraded = legacy_fr_metrics(trials)?;
            Ok(ConditionMetrics {
                condition: name.clone(),
                hm_m: hm.hm_m,
                hm_std: hm.hm_std,
                legacy_base,
                legacy_degraded,
                legacy_delta: legacy_degraded.delta(&legacy_base),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        adapter: adapter.to_string(),
        conditions,
    })
}
