//! Dynamic energy-temporal threshold.
//!
//! The threshold for step `t + 1` is the mean of an energy term computed from
//! the layer's potentials at `t` and a temporal term driven by each neuron's
//! depolarisation between `t` and `t + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BdettConfig {
    pub eta: f64,
    /// Softplus temperature of the energy term.
    pub psi_det: f64,
    /// Time constant of the temporal term.
    pub c: f64,
}

impl Default for BdettConfig {
    fn default() -> Self {
        Self {
            eta: 0.01,
            psi_det: 4.0,
            c: 3.0,
        }
    }
}

impl BdettConfig {
    /// Settings used for continuous-control hosts.
    pub fn control() -> Self {
        Self {
            psi_det: 6.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi_det.is_finite()
            && self.psi_det > 0.0
            && self.c.is_finite()
            && self.c > 0.0
            && self.eta.is_finite())
        {
            return Err(Error::Config(
                "BDETT needs finite eta and positive psi_det and C".into(),
            ));
        }
        Ok(())
    }
}

/// `mean(x) - 0.2 * (max(x) - min(x))`.
fn layer_level(x: &[f64]) -> f64 {
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    sum / x.len() as f64 - 0.2 * (hi - lo)
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Dynamic energy threshold for every neuron of a layer.
pub fn bdett_det(potentials: &[f64], prev_thresholds: &[f64], cfg: &BdettConfig) -> Vec<f64> {
    if potentials.is_empty() {
        return Vec::new();
    }
    let v_m = layer_level(potentials);
    let v_theta = layer_level(prev_thresholds);
    potentials
        .iter()
        .map(|&v| {
            let d = v - v_m;
            cfg.eta * d + v_theta + softplus(d / cfg.psi_det)
        })
        .collect()
}

fn dtt_offset(prev_thresholds: &[f64]) -> f64 {
    let mu = prev_thresholds.iter().sum::<f64>() / prev_thresholds.len() as f64;
    -(-mu.abs()).exp()
}

/// Dynamic temporal threshold for one neuron moving from `v_t` to `v_next`.
pub fn bdett_dtt(v_t: f64, v_next: f64, prev_thresholds: &[f64], c: f64) -> f64 {
    dtt_offset(prev_thresholds) + (-(v_next - v_t) / c).exp()
}

pub fn bdett_threshold(det: f64, dtt: f64) -> f64 {
    0.5 * (det + dtt)
}

/// Per-layer BDETT bookkeeping between steps.
#[derive(Debug, Clone)]
pub struct BdettState {
    cfg: BdettConfig,
    initial: f64,
    prev_potentials: Vec<f64>,
    thresholds: Vec<f64>,
    det: Vec<f64>,
}

impl BdettState {
    /// Starts every neuron at the static threshold `initial` with resting
    /// potentials.
    pub fn new(neurons: usize, initial: f64, cfg: BdettConfig) -> Self {
        let mut s = Self {
            cfg,
            initial,
            prev_potentials: Vec::new(),
            thresholds: Vec::new(),
            det: Vec::new(),
        };
        s.prev_potentials = vec![0.0; neurons];
        s.reset();
        s
    }

    pub fn reset(&mut self) {
        self.prev_potentials.fill(0.0);
        self.thresholds = vec![self.initial; self.prev_potentials.len()];
        self.det = bdett_det(&self.prev_potentials, &self.thresholds, &self.cfg);
    }

    /// Given this step's potentials, computes and stores the thresholds the
    /// layer fires against.
    pub fn advance(&mut self, potentials: &[f64]) -> &[f64] {
        let a = dtt_offset(&self.thresholds);
        for (i, &v) in potentials.iter().enumerate() {
            let dtt = a + (-(v - self.prev_potentials[i]) / self.cfg.c).exp();
            self.thresholds[i] = bdett_threshold(self.det[i], dtt);
        }
        self.det = bdett_det(potentials, &self.thresholds, &self.cfg);
        self.prev_potentials.copy_from_slice(potentials);
        &self.thresholds
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}
